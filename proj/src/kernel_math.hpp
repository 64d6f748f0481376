#pragma once

// Per-item arithmetic shared by the serial and OpenMP kernels.

#include <cmath>
#include <vector>

#include "rbsde/kernels.hpp"
#include "rbsde/philox.hpp"

namespace rbsde::kernels::detail {

// Average over the 2^d sign patterns by pairwise halving, so symmetric
// values (+a, -a) cancel exactly and constants pass through unchanged. The
// jump outcomes are then combined as m_0 + sum_k q_k (m_k - m_0), which
// never forms q_0 = 1 - sum q_k explicitly.
inline void tree_average_node(const TreeAverageArgs& a, std::size_t parent,
                              std::vector<double>& scratch) {
  const std::size_t signs = std::size_t{1} << a.brownian_dim;
  const std::size_t outcomes = a.jump_probs.size();
  const std::size_t branching = signs * outcomes;
  const double* base = a.next.data() + parent * branching * a.width;
  scratch.resize(signs);
  for (int c = 0; c < a.width; ++c) {
    double m0 = 0.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < outcomes; ++j) {
      for (std::size_t s = 0; s < signs; ++s) scratch[s] = base[(j * signs + s) * a.width + c];
      for (std::size_t stride = 1; stride < signs; stride <<= 1)
        for (std::size_t s = 0; s < signs; s += 2 * stride)
          scratch[s] = 0.5 * (scratch[s] + scratch[s + stride]);
      if (j == 0) {
        m0 = scratch[0];
      } else {
        acc += a.jump_probs[j] * (scratch[0] - m0);
      }
    }
    a.out[parent * a.width + c] = m0 + acc;
  }
}

inline void design_row(const DesignArgs& a, std::size_t r, Mat& out) {
  const int d = a.brownian_dim;
  const int q = d + a.mark_count;
  double s[64];
  for (int c = 0; c < d; ++c) s[c] = a.w[r * d + c];
  for (int k = 0; k < a.mark_count; ++k) s[d + k] = static_cast<double>(a.counts[r * a.mark_count + k]);
  Eigen::Index col = 0;
  out(r, col++) = 1.0;
  if (a.degree >= 1)
    for (int i = 0; i < q; ++i) out(r, col++) = s[i];
  if (a.degree >= 2)
    for (int i = 0; i < q; ++i)
      for (int j = i; j < q; ++j) out(r, col++) = s[i] * s[j];
}

inline void fit_row(const Mat& design, const Mat& coef, std::size_t r, std::span<double> out) {
  const Eigen::Index width = coef.cols();
  for (Eigen::Index c = 0; c < width; ++c) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < design.cols(); ++j) acc += design(r, j) * coef(j, c);
    out[r * width + c] = acc;
  }
}

inline void sample_path_step(const SampleStepArgs& a, std::size_t p) {
  const int d = a.brownian_dim;
  const auto marks = a.lambda_h.size();
  PathStream rs(a.seed, p, a.step_index);
  const double sq = std::sqrt(a.step);
  for (int c = 0; c < d; ++c) {
    const double inc = sq * rs.normal();
    a.dw[p * d + c] = inc;
    a.w[p * d + c] = a.prev_w[p * d + c] + inc;
  }
  for (std::size_t k = 0; k < marks; ++k) {
    const bool jump = rs.uniform() < a.lambda_h[k];
    a.counts[p * marks + k] = a.prev_counts[p * marks + k] + (jump ? 1 : 0);
    a.dnu[p * marks + k] = jump ? 1.0 - a.lambda_h[k] : -a.lambda_h[k];
  }
}

inline void backward_node(const BackwardStepArgs& a, std::size_t i) {
  const int m = a.m, d = a.d, kk = a.k_marks;
  const std::size_t width = static_cast<std::size_t>(m) * (1 + d + kk);
  const double* mom = a.moments.data() + i * width;
  const Vec e = Eigen::Map<const Vec>(mom, m);
  Mat z(m, d);
  for (int c = 0; c < d; ++c)
    for (int r = 0; r < m; ++r) z(r, c) = mom[m + c * m + r] / a.step;
  Mat v(m, kk);
  for (int k = 0; k < kk; ++k)
    for (int r = 0; r < m; ++r) v(r, k) = mom[m + m * d + k * m + r] / a.v_scale[k];

  Vec tgt = e;
  Vec hf = Vec::Zero(m);
  if (a.driver && *a.driver) {
    hf = a.step * (*a.driver)(a.t, e, z, v);
    tgt += hf;
  }
  const ConvexBody& body = a.bodies.size() == 1 ? a.bodies[0] : a.bodies[i];
  const Vec y = body.penalty_resolvent(tgt, a.penalty_weight);

  for (int r = 0; r < m; ++r) {
    a.y[i * m + r] = y(r);
    a.dk[i * m + r] = y(r) - tgt(r);
    a.target[i * m + r] = tgt(r);
    a.drift[i * m + r] = hf(r);
  }
  for (int c = 0; c < d; ++c)
    for (int r = 0; r < m; ++r) a.z[i * m * d + c * m + r] = z(r, c);
  for (int k = 0; k < kk; ++k)
    for (int r = 0; r < m; ++r) a.v[i * m * kk + k * m + r] = v(r, k);
}

}  // namespace rbsde::kernels::detail
