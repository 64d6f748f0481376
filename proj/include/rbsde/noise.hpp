#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rbsde/geometry.hpp"
#include "rbsde/kernels.hpp"

namespace rbsde {

struct JumpMark {
  Vec value;              // e_k, nonzero
  double intensity = 0.0; // lambda_k > 0
};

// Brownian dimension, finite jump-mark set and the time grid.
struct NoiseModel {
  int brownian_dim = 1;
  std::vector<JumpMark> marks;
  int steps = 1;
  double horizon = 1.0;

  double step() const { return horizon / steps; }
  int mark_count() const { return static_cast<int>(marks.size()); }
  // Throws InvalidArgument unless lambda_k h < 1 and sum lambda_k h <= 1/2.
  void validate() const;
};

enum class ScenarioMode { Tree, MonteCarlo };

// Per-level storage, node-major: entry (node, c) sits at node * width + c.
struct ScenarioLevel {
  std::size_t nodes = 0;
  std::vector<double> w;             // cumulative Brownian value, width d
  std::vector<double> dw;            // increment arriving at this level, width d
  std::vector<std::int32_t> counts;  // cumulative jump counts, width K
  std::vector<double> dnu;           // compensated increment 1{jump k} - lambda_k h, width K
};

// The discrete filtration: an exact non-recombining tree or a seeded path
// ensemble on the grid t_k = k h, k = 0..N.
class ScenarioSet {
 public:
  ScenarioMode mode() const noexcept { return mode_; }
  const NoiseModel& model() const noexcept { return model_; }
  int steps() const noexcept { return model_.steps; }
  double step() const noexcept { return model_.step(); }
  int brownian_dim() const noexcept { return model_.brownian_dim; }
  int mark_count() const noexcept { return model_.mark_count(); }
  double time(int level) const { return level == steps() ? model_.horizon : level * step(); }

  std::size_t nodes(int level) const { return levels_.at(level).nodes; }
  std::size_t total_nodes() const;
  const ScenarioLevel& level(int k) const { return levels_.at(k); }

  // Ancestor of `node` (at `level`) one level up.
  std::size_t parent(int level, std::size_t node) const {
    (void)level;
    return mode_ == ScenarioMode::Tree ? node / branching_ : node;
  }
  // Ancestor of `node` at an earlier level.
  std::size_t ancestor(int level, std::size_t node, int earlier) const;

  // Tree only: children of node i at level k are i*B + b, b = j*2^d + s,
  // with sign pattern s (bit c set means component c moves down) and jump
  // outcome j (0 = none, j = mark index + 1).
  int branching() const noexcept { return branching_; }
  const std::vector<double>& jump_outcome_probs() const noexcept { return jump_probs_; }
  // Probability of reaching each node at `level` (tree), or 1/n (Monte Carlo).
  double node_weight(int level, std::size_t node) const;

  std::uint64_t seed() const noexcept { return seed_; }

  Eigen::Map<const Vec> brownian(int level, std::size_t node) const;
  Eigen::Map<const Vec> brownian_increment(int level, std::size_t node) const;
  Eigen::Map<const Vec> compensated_jump(int level, std::size_t node) const;
  Eigen::Map<const Eigen::VectorXi> jump_counts(int level, std::size_t node) const;

 private:
  friend ScenarioSet build_tree(const NoiseModel&);
  friend ScenarioSet sample_paths(const NoiseModel&, std::size_t, std::uint64_t, Exec);

  ScenarioMode mode_ = ScenarioMode::Tree;
  NoiseModel model_;
  int branching_ = 1;
  std::vector<double> jump_probs_;  // q_0 = 1 - sum, q_k = lambda_k h
  std::uint64_t seed_ = 0;
  std::vector<ScenarioLevel> levels_;
};

inline constexpr double kTreeLeafLimit = 1e7;

// Full scenario tree. Throws SizeGuardExceeded when (2^d (1+K))^N > 1e7.
ScenarioSet build_tree(const NoiseModel& model);

// Gaussian increments and independent Bernoulli(lambda_k h) jumps, drawn from
// Philox streams keyed by (seed, path, step): independent of thread count.
ScenarioSet sample_paths(const NoiseModel& model, std::size_t n_paths, std::uint64_t seed,
                         Exec exec = Exec::Parallel);

// E[values_{k+1} | F_k]. `next` is nodes(level+1) x width, `out` nodes(level) x width.
// Tree: exact weighted average. Monte Carlo: least squares on polynomials of
// total degree <= 2 in (W_k, jump counts), falling back to degree 1 and then
// 0 on rank deficiency.
void conditional_expectation(const ScenarioSet& scen, int level, std::span<const double> next,
                             int width, std::span<double> out, Exec exec = Exec::Parallel);

// Degree of the regression basis actually used at `level` (Monte Carlo), for reporting.
int regression_degree(const ScenarioSet& scen, int level);

// E[values_level] for one scalar per node, by folding conditional expectations
// down to the root (tree) or by the ensemble mean (Monte Carlo).
double expectation(const ScenarioSet& scen, int level, std::span<const double> values);

}  // namespace rbsde
