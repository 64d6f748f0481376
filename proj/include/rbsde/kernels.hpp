#pragma once

// Data-parallel inner loops. Each kernel exists twice: a plain serial
// reference (kernels::reference) and an OpenMP version (kernels::omp). Both
// share the per-item arithmetic, so their outputs agree bit for bit; the
// reference is what the tests compare against.

#include <cstdint>
#include <exception>
#include <functional>
#include <span>

#include "rbsde/geometry.hpp"

namespace rbsde {

enum class Exec { Serial, Parallel };

using DriverFn = std::function<Vec(double t, const Vec& y, const Mat& z, const Mat& v)>;

namespace kernels {

struct TreeAverageArgs {
  int brownian_dim = 1;
  std::span<const double> jump_probs;  // q_0..q_K, q_0 = 1 - sum
  std::size_t parents = 0;
  std::span<const double> next;        // (parents * branching) x width
  int width = 1;
  std::span<double> out;               // parents x width
};

struct DesignArgs {
  std::size_t rows = 0;
  int brownian_dim = 1;
  int mark_count = 0;
  std::span<const double> w;                // rows x d
  std::span<const std::int32_t> counts;     // rows x K
  int degree = 2;
};

struct SampleStepArgs {
  int brownian_dim = 1;
  std::span<const double> lambda_h;  // per mark
  double step = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t step_index = 0;     // index of the arriving level
  std::size_t paths = 0;
  std::span<const double> prev_w;
  std::span<const std::int32_t> prev_counts;
  std::span<double> w, dw, dnu;
  std::span<std::int32_t> counts;
};

// One backward step of the scheme for every node of a level.
struct BackwardStepArgs {
  std::size_t nodes = 0;
  int m = 1, d = 1, k_marks = 0;
  double t = 0.0;
  double step = 0.0;
  double penalty_weight = 0.0;  // n h, or +inf for the projection limit
  std::span<const double> moments;     // nodes x m(1+d+K): E[Y], E[Y dW^T], E[Y dnu^T]
  std::span<const double> v_scale;     // per mark: lambda h (1 - lambda h)
  std::span<const ConvexBody> bodies;  // size 1 (shared) or nodes
  const DriverFn* driver = nullptr;
  std::span<double> y, z, v, dk, target, drift;  // outputs; drift = h f
};

int basis_size(int state_dim, int degree);

namespace reference {
void tree_average(const TreeAverageArgs& a);
void design_matrix(const DesignArgs& a, Mat& out);
void apply_fit(const Mat& design, const Mat& coef, std::span<double> out);
void sample_step(const SampleStepArgs& a);
void backward_step(const BackwardStepArgs& a);
}  // namespace reference

namespace omp {
void tree_average(const TreeAverageArgs& a);
void design_matrix(const DesignArgs& a, Mat& out);
void apply_fit(const Mat& design, const Mat& coef, std::span<double> out);
void sample_step(const SampleStepArgs& a);
void backward_step(const BackwardStepArgs& a);
}  // namespace omp

inline void tree_average(Exec e, const TreeAverageArgs& a) {
  e == Exec::Serial ? reference::tree_average(a) : omp::tree_average(a);
}
inline void design_matrix(Exec e, const DesignArgs& a, Mat& out) {
  e == Exec::Serial ? reference::design_matrix(a, out) : omp::design_matrix(a, out);
}
inline void apply_fit(Exec e, const Mat& design, const Mat& coef, std::span<double> out) {
  e == Exec::Serial ? reference::apply_fit(design, coef, out) : omp::apply_fit(design, coef, out);
}
inline void sample_step(Exec e, const SampleStepArgs& a) {
  e == Exec::Serial ? reference::sample_step(a) : omp::sample_step(a);
}
inline void backward_step(Exec e, const BackwardStepArgs& a) {
  e == Exec::Serial ? reference::backward_step(a) : omp::backward_step(a);
}

// Independent per-index work whose result must not depend on scheduling.
template <class Fn>
void for_each_index(Exec e, std::size_t n, Fn&& fn) {
  const auto count = static_cast<std::int64_t>(n);
  if (e == Exec::Serial) {
    for (std::int64_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
    return;
  }
  std::exception_ptr err;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(rbsde_for_each_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace kernels
}  // namespace rbsde
