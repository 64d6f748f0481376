#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rbsde/geometry.hpp"
#include "rbsde/noise.hpp"

namespace rbsde {

// Read-only view of the noise observed on [0, t]: either a node of a
// ScenarioSet (walks its ancestors) or an explicit list of Brownian values
// on a grid. A default-constructed history carries no noise at all and only
// serves deterministic motions.
class NoiseHistory {
 public:
  NoiseHistory() = default;
  NoiseHistory(const ScenarioSet& scen, int level, std::size_t node);
  NoiseHistory(double step, std::vector<Vec> brownian,
               std::vector<Eigen::VectorXi> jump_counts = {});

  bool empty() const noexcept;
  double time() const;
  // Brownian value at grid time t <= time(); throws past the covered range.
  Vec brownian_at(double t) const;
  // Cumulative jump counts at grid time t (empty vector if none recorded).
  Eigen::VectorXi jump_counts_at(double t) const;

 private:
  struct TreeRef {
    const ScenarioSet* scen;
    int level;
    std::size_t node;
  };
  struct Owned {
    double step;
    std::shared_ptr<const std::vector<Vec>> values;
    std::shared_ptr<const std::vector<Eigen::VectorXi>> counts;
  };
  std::variant<std::monostate, TreeRef, Owned> src_;
};

using ScalarFn = std::function<double(double)>;
using PointFn = std::function<Vec(double)>;
using InteriorFn = std::function<Vec(double, const NoiseHistory&)>;

namespace motion {
struct Static {
  ConvexBody body;
};
struct MovingBall {
  PointFn center;
  ScalarFn radius;
};
struct MovingPolytope {
  Mat normals;
  PointFn offsets;
};
// center(t) = base(t) + gain(W_t): adapted through the current Brownian value only.
struct AdaptedBall {
  PointFn base;
  std::function<Vec(const Vec&)> gain;
  ScalarFn radius;
};
}  // namespace motion

using Motion = std::variant<motion::Static, motion::MovingBall, motion::MovingPolytope,
                            motion::AdaptedBall>;

// t -> D_t on [0, T] together with the interior process A_t and a declared
// Lipschitz constant of the motion in the Hausdorff metric.
class DomainPath {
 public:
  DomainPath(Motion motion, double horizon, InteriorFn interior, double lipschitz = 0.0);

  ConvexBody at(double t, const NoiseHistory& history = {}) const;
  Vec interior(double t, const NoiseHistory& history = {}) const;

  bool adapted() const noexcept { return std::holds_alternative<motion::AdaptedBall>(motion_); }
  bool is_static() const noexcept { return std::holds_alternative<motion::Static>(motion_); }
  double horizon() const noexcept { return horizon_; }
  double lipschitz() const noexcept { return lipschitz_; }
  int dim() const noexcept { return dim_; }

 private:
  void check_time(double t) const;

  Motion motion_;
  double horizon_;
  InteriorFn interior_;
  double lipschitz_;
  int dim_ = 0;
};

// Piecewise-constant approximation frozen at the left end of each interval:
// D^j_t = D_{sigma_{i-1}} on [sigma_{i-1}, sigma_i), last interval closed at T.
class DiscretizedDomainPath {
 public:
  DiscretizedDomainPath(DomainPath path, std::vector<double> breakpoints, int j);

  const DomainPath& source() const noexcept { return path_; }
  // sigma_0 = 0 < sigma_1 < ... < sigma_k = T.
  const std::vector<double>& breakpoints() const noexcept { return breaks_; }
  int refinement() const noexcept { return j_; }
  std::size_t intervals() const noexcept { return breaks_.size() - 1; }

  std::size_t interval_of(double t) const;
  double frozen_time(double t) const { return breaks_[interval_of(t)]; }
  ConvexBody at(double t, const NoiseHistory& history = {}) const;
  // Deterministic motions only: the body of each interval.
  std::vector<ConvexBody> bodies() const;

 private:
  DomainPath path_;
  std::vector<double> breaks_;
  int j_;
};

// sigma_i = (sigma_{i-1} + a_i) ^ T with a_i = 1/j by default. Supplied widths
// must lie in [1/j, 2/j]; the final one may be shorter when it closes at T.
DiscretizedDomainPath discretize(const DomainPath& path, int j,
                                 std::optional<std::vector<double>> widths = std::nullopt);

// max over grid of hausdorff(D^j_t, D_t).
double discretization_gap(const DomainPath& path, const DiscretizedDomainPath& disc,
                          std::span<const double> grid, const NoiseHistory& history = {},
                          int n_dirs = 64);

struct MarginReport {
  double min_margin = 0.0;
  double time_at_min = 0.0;
  bool passed = false;
};

// Minimum of boundary_margin(D_t, A_t) over the grid (and over every
// scenario node at grid times when `scen` is given). Throws
// AssumptionViolation("H4") when A_t leaves D_t; `passed` is false when the
// minimum margin is not positive.
MarginReport verify_h4(const DomainPath& path, std::span<const double> grid,
                       const ScenarioSet* scen = nullptr);

// verify_h4 that throws AssumptionViolation("H4") when the margin is not positive.
MarginReport require_h4(const DomainPath& path, std::span<const double> grid,
                        const ScenarioSet* scen = nullptr);

// Times k T / n for k = 0..n.
std::vector<double> uniform_grid(double horizon, int n);

}  // namespace rbsde
