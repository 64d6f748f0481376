#pragma once

// Independent reference computations used by the tests. None of these call
// into the library's projection or resolvent code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rbsde/geometry.hpp"

namespace oracle {

using rbsde::Mat;
using rbsde::Vec;

inline Vec clamp(const Vec& x, const Vec& lo, const Vec& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

inline Vec ball_projection(const Vec& x, const Vec& c, double r) {
  const double n = (x - c).norm();
  return n <= r ? x : Vec(c + (x - c) * (r / n));
}

// Dykstra's alternating projections onto the half-spaces <a_i, y> <= b_i.
// Stops when a full sweep moves the iterate by less than tol and the iterate
// is feasible to tol; Dykstra can crawl while still infeasible.
inline Vec dykstra(const Mat& normals, const Vec& offsets, const Vec& x, double tol = 1e-14,
                   int max_sweeps = 2000000) {
  const int f = static_cast<int>(normals.rows());
  Vec y = x;
  std::vector<Vec> incr(f, Vec::Zero(x.size()));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vec before = y;
    for (int i = 0; i < f; ++i) {
      const Vec a = normals.row(i).transpose();
      const Vec p = y + incr[i];
      const double s = a.dot(p) - offsets[i];
      const Vec q = s > 0 ? Vec(p - s * a) : p;
      incr[i] = p - q;
      y = q;
    }
    if ((y - before).norm() < tol && (normals * y - offsets).maxCoeff() <= tol) break;
  }
  return y;
}

// Damped fixed point y <- (target + w Pi(y)) / (1 + w), started at target.
template <class Proj>
Vec resolvent_fixed_point(const Vec& target, double w, Proj&& proj, double tol = 1e-15,
                          int max_iter = 100000) {
  Vec y = target;
  for (int it = 0; it < max_iter; ++it) {
    const Vec next = (target + w * proj(y)) / (1.0 + w);
    const double step = (next - y).norm();
    y = next;
    if (step <= tol * (1.0 + y.norm())) break;
  }
  return y;
}

inline Vec random_vec(std::mt19937_64& rng, int m, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(m);
  for (int i = 0; i < m; ++i) v[i] = g(rng);
  return v;
}

inline Vec random_unit(std::mt19937_64& rng, int m) {
  Vec v = random_vec(rng, m, 1.0);
  return v / v.norm();
}

// A bounded polytope: the box [-3,3]^m cut by a few random half-spaces that
// keep the origin at distance >= 0.5 from each cut.
inline std::pair<Mat, Vec> random_polytope(std::mt19937_64& rng, int m, int cuts) {
  Mat n(2 * m + cuts, m);
  Vec b(2 * m + cuts);
  n.setZero();
  for (int i = 0; i < m; ++i) {
    n(2 * i, i) = -1.0;
    n(2 * i + 1, i) = 1.0;
    b[2 * i] = 3.0;
    b[2 * i + 1] = 3.0;
  }
  std::uniform_real_distribution<double> off(0.5, 2.0);
  for (int c = 0; c < cuts; ++c) {
    n.row(2 * m + c) = random_unit(rng, m).transpose();
    b[2 * m + c] = off(rng);
  }
  return {n, b};
}

}  // namespace oracle
