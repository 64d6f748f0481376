#include "rbsde/noise.hpp"

#include <cmath>
#include <string>

namespace rbsde {

void NoiseModel::validate() const {
  if (brownian_dim < 1) throw InvalidArgument("noise: Brownian dimension must be >= 1");
  if (steps < 1) throw InvalidArgument("noise: steps must be >= 1");
  if (!(horizon > 0.0)) throw InvalidArgument("noise: horizon must be positive");
  if (brownian_dim + mark_count() > 64) throw InvalidArgument("noise: state dimension above 64");
  const double h = step();
  double total = 0.0;
  for (std::size_t k = 0; k < marks.size(); ++k) {
    const auto& mk = marks[k];
    if (!(mk.intensity > 0.0)) throw InvalidArgument("noise: intensities must be positive");
    if (mk.value.size() == 0 || mk.value.norm() == 0.0)
      throw InvalidArgument("noise: mark " + std::to_string(k) + " must be a nonzero vector");
    if (!(mk.intensity * h < 1.0))
      throw InvalidArgument("noise: lambda_k h must be < 1 for mark " + std::to_string(k));
    total += mk.intensity * h;
  }
  if (total > 0.5) throw InvalidArgument("noise: sum of lambda_k h must be <= 0.5");
}

std::size_t ScenarioSet::total_nodes() const {
  std::size_t n = 0;
  for (const auto& l : levels_) n += l.nodes;
  return n;
}

std::size_t ScenarioSet::ancestor(int level, std::size_t node, int earlier) const {
  if (earlier > level || earlier < 0) throw InvalidArgument("ancestor: level out of range");
  if (mode_ == ScenarioMode::MonteCarlo) return node;
  for (int l = level; l > earlier; --l) node /= static_cast<std::size_t>(branching_);
  return node;
}

double ScenarioSet::node_weight(int level, std::size_t node) const {
  if (mode_ == ScenarioMode::MonteCarlo) return 1.0 / static_cast<double>(nodes(level));
  double p = 1.0;
  const std::size_t signs = std::size_t{1} << model_.brownian_dim;
  const double sign_prob = 1.0 / static_cast<double>(signs);
  for (int l = level; l > 0; --l) {
    const std::size_t b = node % static_cast<std::size_t>(branching_);
    p *= sign_prob * jump_probs_[b / signs];
    node /= static_cast<std::size_t>(branching_);
  }
  return p;
}

Eigen::Map<const Vec> ScenarioSet::brownian(int level, std::size_t node) const {
  const int d = brownian_dim();
  return Eigen::Map<const Vec>(levels_.at(level).w.data() + node * d, d);
}

Eigen::Map<const Vec> ScenarioSet::brownian_increment(int level, std::size_t node) const {
  const int d = brownian_dim();
  return Eigen::Map<const Vec>(levels_.at(level).dw.data() + node * d, d);
}

Eigen::Map<const Vec> ScenarioSet::compensated_jump(int level, std::size_t node) const {
  const int k = mark_count();
  return Eigen::Map<const Vec>(levels_.at(level).dnu.data() + node * k, k);
}

Eigen::Map<const Eigen::VectorXi> ScenarioSet::jump_counts(int level, std::size_t node) const {
  const int k = mark_count();
  return Eigen::Map<const Eigen::VectorXi>(levels_.at(level).counts.data() + node * k, k);
}

namespace {

ScenarioLevel root_level(std::size_t nodes, int d, int k) {
  ScenarioLevel l;
  l.nodes = nodes;
  l.w.assign(nodes * d, 0.0);
  l.dw.assign(nodes * d, 0.0);
  l.counts.assign(nodes * k, 0);
  l.dnu.assign(nodes * k, 0.0);
  return l;
}

}  // namespace

ScenarioSet build_tree(const NoiseModel& model) {
  model.validate();
  const int d = model.brownian_dim;
  const int kk = model.mark_count();
  const std::size_t signs = std::size_t{1} << d;
  const std::size_t branching = signs * static_cast<std::size_t>(1 + kk);
  const double leaves = std::pow(static_cast<double>(branching), model.steps);
  if (leaves > kTreeLeafLimit)
    throw SizeGuardExceeded("scenario tree would have " + std::to_string(leaves) +
                            " leaves (limit 1e7)");

  ScenarioSet s;
  s.mode_ = ScenarioMode::Tree;
  s.model_ = model;
  s.branching_ = static_cast<int>(branching);
  const double h = model.step();
  const double sq = std::sqrt(h);
  double total = 0.0;
  s.jump_probs_.assign(1 + kk, 0.0);
  for (int k = 0; k < kk; ++k) {
    s.jump_probs_[1 + k] = model.marks[k].intensity * h;
    total += s.jump_probs_[1 + k];
  }
  s.jump_probs_[0] = 1.0 - total;

  s.levels_.push_back(root_level(1, d, kk));
  for (int lvl = 1; lvl <= model.steps; ++lvl) {
    const ScenarioLevel& prev = s.levels_.back();
    ScenarioLevel cur = root_level(prev.nodes * branching, d, kk);
    for (std::size_t i = 0; i < cur.nodes; ++i) {
      const std::size_t par = i / branching;
      const std::size_t b = i % branching;
      const std::size_t sgn = b % signs;
      const std::size_t jump = b / signs;
      for (int c = 0; c < d; ++c) {
        const double inc = ((sgn >> c) & 1u) ? -sq : sq;
        cur.dw[i * d + c] = inc;
        cur.w[i * d + c] = prev.w[par * d + c] + inc;
      }
      for (int k = 0; k < kk; ++k) {
        const bool hit = jump == static_cast<std::size_t>(k + 1);
        const double lh = s.jump_probs_[1 + k];
        cur.counts[i * kk + k] = prev.counts[par * kk + k] + (hit ? 1 : 0);
        cur.dnu[i * kk + k] = hit ? 1.0 - lh : -lh;
      }
    }
    s.levels_.push_back(std::move(cur));
  }
  return s;
}

ScenarioSet sample_paths(const NoiseModel& model, std::size_t n_paths, std::uint64_t seed,
                         Exec exec) {
  model.validate();
  if (n_paths < 1) throw InvalidArgument("sample_paths: need at least one path");
  const int d = model.brownian_dim;
  const int kk = model.mark_count();
  ScenarioSet s;
  s.mode_ = ScenarioMode::MonteCarlo;
  s.model_ = model;
  s.branching_ = 1;
  s.seed_ = seed;
  const double h = model.step();
  std::vector<double> lambda_h(kk);
  double total = 0.0;
  for (int k = 0; k < kk; ++k) {
    lambda_h[k] = model.marks[k].intensity * h;
    total += lambda_h[k];
  }
  s.jump_probs_.assign(1 + kk, 0.0);
  s.jump_probs_[0] = 1.0 - total;
  for (int k = 0; k < kk; ++k) s.jump_probs_[1 + k] = lambda_h[k];

  s.levels_.push_back(root_level(n_paths, d, kk));
  for (int lvl = 1; lvl <= model.steps; ++lvl) {
    ScenarioLevel cur = root_level(n_paths, d, kk);
    const ScenarioLevel& prev = s.levels_.back();
    kernels::SampleStepArgs a;
    a.brownian_dim = d;
    a.lambda_h = lambda_h;
    a.step = h;
    a.seed = seed;
    a.step_index = static_cast<std::uint32_t>(lvl);
    a.paths = n_paths;
    a.prev_w = prev.w;
    a.prev_counts = prev.counts;
    a.w = cur.w;
    a.dw = cur.dw;
    a.dnu = cur.dnu;
    a.counts = cur.counts;
    kernels::sample_step(exec, a);
    s.levels_.push_back(std::move(cur));
  }
  return s;
}

namespace {

struct RegressionFit {
  int degree = 0;
  Mat design;
  Eigen::ColPivHouseholderQR<Mat> qr;
};

RegressionFit fit_basis(const ScenarioSet& scen, int level, Exec exec) {
  const ScenarioLevel& l = scen.level(level);
  RegressionFit fit;
  for (int degree = 2; degree >= 0; --degree) {
    kernels::DesignArgs a;
    a.rows = l.nodes;
    a.brownian_dim = scen.brownian_dim();
    a.mark_count = scen.mark_count();
    a.w = l.w;
    a.counts = l.counts;
    a.degree = degree;
    kernels::design_matrix(exec, a, fit.design);
    fit.qr.setThreshold(1e-10);
    fit.qr.compute(fit.design);
    if (fit.qr.rank() == fit.design.cols() || degree == 0) {
      fit.degree = degree;
      return fit;
    }
  }
  return fit;
}

}  // namespace

int regression_degree(const ScenarioSet& scen, int level) {
  if (scen.mode() == ScenarioMode::Tree) return -1;
  return fit_basis(scen, level, Exec::Serial).degree;
}

void conditional_expectation(const ScenarioSet& scen, int level, std::span<const double> next,
                             int width, std::span<double> out, Exec exec) {
  if (level < 0 || level >= scen.steps())
    throw InvalidArgument("conditional_expectation: level out of range");
  const std::size_t n_next = scen.nodes(level + 1);
  const std::size_t n_here = scen.nodes(level);
  if (next.size() != n_next * width)
    throw DimensionMismatch("conditional_expectation values", static_cast<long>(n_next * width),
                            static_cast<long>(next.size()));
  if (out.size() != n_here * width)
    throw DimensionMismatch("conditional_expectation output", static_cast<long>(n_here * width),
                            static_cast<long>(out.size()));

  if (scen.mode() == ScenarioMode::Tree) {
    kernels::TreeAverageArgs a;
    a.brownian_dim = scen.brownian_dim();
    a.jump_probs = scen.jump_outcome_probs();
    a.parents = n_here;
    a.next = next;
    a.width = width;
    a.out = out;
    kernels::tree_average(exec, a);
    return;
  }

  RegressionFit fit = fit_basis(scen, level, exec);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Mat rhs = Eigen::Map<const RowMajor>(next.data(), static_cast<Eigen::Index>(n_next), width);
  const Mat coef = fit.qr.solve(rhs);
  kernels::apply_fit(exec, fit.design, coef, out);
}

double expectation(const ScenarioSet& scen, int level, std::span<const double> values) {
  if (values.size() != scen.nodes(level))
    throw DimensionMismatch("expectation values", static_cast<long>(scen.nodes(level)),
                            static_cast<long>(values.size()));
  if (scen.mode() == ScenarioMode::MonteCarlo) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
  }
  std::vector<double> cur(values.begin(), values.end());
  for (int l = level - 1; l >= 0; --l) {
    std::vector<double> up(scen.nodes(l));
    conditional_expectation(scen, l, cur, 1, up, Exec::Serial);
    cur.swap(up);
  }
  return cur[0];
}

}  // namespace rbsde
