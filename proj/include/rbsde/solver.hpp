#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <limits>
#include <vector>

#include "rbsde/domain_path.hpp"
#include "rbsde/kernels.hpp"
#include "rbsde/noise.hpp"

namespace rbsde {

// Terminal functional, evaluated on the history up to T.
using TerminalFn = std::function<Vec(const NoiseHistory&)>;

struct BsdeProblem {
  int m = 1;        // dimension of Y
  int d = 1;        // Brownian dimension
  int k_marks = 0;  // number of jump marks
  TerminalFn terminal;
  DriverFn driver;  // empty means f = 0
  double lipschitz = 0.0;

  Vec driver_at(double t, const Vec& y, const Mat& z, const Mat& v) const;
};

// Spot-checks |f(t,y,z,v) - f(t,y',z',v')| <= C (|dy| + |dz| + |dv|) on
// random probes; throws AssumptionViolation("H3") on the first violation and
// otherwise returns the largest observed ratio |df| / (|dy|+|dz|+|dv|).
double check_lipschitz(const BsdeProblem& problem, double horizon, int probes = 1000,
                       std::uint64_t seed = 7);

// f(t,0,0,0) must be finite on the grid; throws AssumptionViolation("H2").
void check_driver_at_zero(const BsdeProblem& problem, std::span<const double> grid);

// Dimensions, the stability guard C h < 1/2, (H2), (H3) and xi in D_T on
// every leaf (H1). The solvers run the same checks; this lets callers reject
// a problem before any work.
void validate_problem(const BsdeProblem& problem, const DomainPath& domain, const ScenarioSet& scen);

struct SolutionLevel {
  std::vector<double> y;       // nodes x m
  std::vector<double> z;       // nodes x (m d), column-major m x d per node
  std::vector<double> v;       // nodes x (m K), column-major m x K per node
  std::vector<double> k;       // cumulative K, nodes x m
  std::vector<double> dk;      // K_{t+h} - K_t, nodes x m
  std::vector<double> target;  // pre-constraint value E + h f, nodes x m
  std::vector<double> drift;   // h f(t, E, Z, V), nodes x m
  std::vector<double> shift;   // breakpoint projection displacement (composer), nodes x m
};

// Discrete (Y, Z, V, K) on every node of a ScenarioSet.
class SolutionBundle {
 public:
  SolutionBundle() = default;
  SolutionBundle(const ScenarioSet& scen, int m, double n_level);

  int m() const noexcept { return m_; }
  int d() const noexcept { return d_; }
  int k_marks() const noexcept { return k_; }
  int steps() const noexcept { return static_cast<int>(levels_.size()) - 1; }
  double step() const noexcept { return step_; }
  double n_level() const noexcept { return n_level_; }
  ScenarioMode mode() const noexcept { return mode_; }
  std::size_t nodes(int level) const { return levels_.at(level).y.size() / m_; }

  Eigen::Map<const Vec> y(int level, std::size_t node) const;
  Eigen::Map<const Mat> z(int level, std::size_t node) const;
  Eigen::Map<const Mat> v(int level, std::size_t node) const;
  Eigen::Map<const Vec> k(int level, std::size_t node) const;
  Eigen::Map<const Vec> dk(int level, std::size_t node) const;
  Eigen::Map<const Vec> target(int level, std::size_t node) const;
  Eigen::Map<const Vec> drift(int level, std::size_t node) const;
  Eigen::Map<const Vec> shift(int level, std::size_t node) const;

  const SolutionLevel& level(int k) const { return levels_.at(k); }
  SolutionLevel& level(int k) { return levels_.at(k); }

  bool operator==(const SolutionBundle& other) const;

 private:
  int m_ = 1, d_ = 1, k_ = 0;
  double step_ = 0.0;
  double n_level_ = 0.0;
  ScenarioMode mode_ = ScenarioMode::Tree;
  std::vector<SolutionLevel> levels_;
};

inline constexpr double kReflected = std::numeric_limits<double>::infinity();

struct SolverOptions {
  Exec exec = Exec::Parallel;
};

// Backward induction from Y_T = xi: moments of Y_{t+h} give E, Z and V, the
// driver is applied explicitly at E, and the penalty step is solved exactly
// by the resolvent of D_t with weight n h. Requires C h < 1/2 and xi in D_T.
SolutionBundle solve_penalized(const BsdeProblem& problem, const DomainPath& domain,
                               const ScenarioSet& scen, double n_level, SolverOptions opts = {});

// Same induction with the penalty step replaced by projection onto D_t.
SolutionBundle solve_reflected_discrete(const BsdeProblem& problem, const DomainPath& domain,
                                        const ScenarioSet& scen, SolverOptions opts = {});

// Interval-by-interval solve in the frozen bodies of `disc`. At every
// breakpoint sigma_i (and at T) the continuation values are projected onto
// the body of the interval to the left. `n_level` may be kReflected.
SolutionBundle solve_piecewise_constant(const BsdeProblem& problem, const DiscretizedDomainPath& disc,
                                        const ScenarioSet& scen, double n_level,
                                        SolverOptions opts = {});

}  // namespace rbsde
