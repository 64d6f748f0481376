#include "rbsde/solver.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

namespace rbsde {

Vec BsdeProblem::driver_at(double t, const Vec& y, const Mat& z, const Mat& v) const {
  if (!driver) return Vec::Zero(m);
  return driver(t, y, z, v);
}

double check_lipschitz(const BsdeProblem& problem, double horizon, int probes, std::uint64_t seed) {
  if (!problem.driver) return 0.0;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 3.0);
  std::uniform_real_distribution<double> ut(0.0, horizon);
  auto vec = [&](int n) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = nd(gen);
    return x;
  };
  auto mat = [&](int r, int c) {
    Mat x(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) x(i, j) = nd(gen);
    return x;
  };
  const int m = problem.m, d = problem.d, kk = problem.k_marks;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const double t = ut(gen);
    const Vec y1 = vec(m), y2 = vec(m);
    const Mat z1 = mat(m, d), z2 = mat(m, d);
    const Mat v1 = mat(m, kk), v2 = mat(m, kk);
    const Vec f1 = problem.driver(t, y1, z1, v1);
    const Vec f2 = problem.driver(t, y2, z2, v2);
    if (f1.size() != m || f2.size() != m) throw DimensionMismatch("driver output", m, f1.size());
    const double lhs = (f1 - f2).norm();
    const double dist = (y1 - y2).norm() + (z1 - z2).norm() + (v1 - v2).norm();
    if (lhs > problem.lipschitz * dist * (1.0 + kPolicy.lipschitz_slack))
      throw AssumptionViolation("H3", "driver exceeds the declared Lipschitz constant " +
                                          std::to_string(problem.lipschitz) + " (observed ratio " +
                                          std::to_string(lhs / dist) + ")");
    if (dist > 0.0) worst = std::max(worst, lhs / dist);
  }
  return worst;
}

void check_driver_at_zero(const BsdeProblem& problem, std::span<const double> grid) {
  if (!problem.driver) return;
  const Vec y = Vec::Zero(problem.m);
  const Mat z = Mat::Zero(problem.m, problem.d);
  const Mat v = Mat::Zero(problem.m, problem.k_marks);
  for (double t : grid) {
    const Vec f = problem.driver(t, y, z, v);
    if (!f.allFinite()) throw AssumptionViolation("H2", "f(t,0,0,0) is not finite at t = " + std::to_string(t));
  }
}

SolutionBundle::SolutionBundle(const ScenarioSet& scen, int m, double n_level)
    : m_(m),
      d_(scen.brownian_dim()),
      k_(scen.mark_count()),
      step_(scen.step()),
      n_level_(n_level),
      mode_(scen.mode()) {
  levels_.resize(scen.steps() + 1);
  for (int l = 0; l <= scen.steps(); ++l) {
    const std::size_t n = scen.nodes(l);
    SolutionLevel& s = levels_[l];
    s.y.assign(n * m, 0.0);
    s.z.assign(n * m * d_, 0.0);
    s.v.assign(n * m * k_, 0.0);
    s.k.assign(n * m, 0.0);
    s.dk.assign(n * m, 0.0);
    s.target.assign(n * m, 0.0);
    s.drift.assign(n * m, 0.0);
    s.shift.assign(n * m, 0.0);
  }
}

Eigen::Map<const Vec> SolutionBundle::y(int level, std::size_t node) const {
  return Eigen::Map<const Vec>(levels_.at(level).y.data() + node * m_, m_);
}
Eigen::Map<const Mat> SolutionBundle::z(int level, std::size_t node) const {
  return Eigen::Map<const Mat>(levels_.at(level).z.data() + node * m_ * d_, m_, d_);
}
Eigen::Map<const Mat> SolutionBundle::v(int level, std::size_t node) const {
  return Eigen::Map<const Mat>(levels_.at(level).v.data() + node * m_ * k_, m_, k_);
}
Eigen::Map<const Vec> SolutionBundle::k(int level, std::size_t node) const {
  return Eigen::Map<const Vec>(levels_.at(level).k.data() + node * m_, m_);
}
Eigen::Map<const Vec> SolutionBundle::dk(int level, std::size_t node) const {
  return Eigen::Map<const Vec>(levels_.at(level).dk.data() + node * m_, m_);
}
Eigen::Map<const Vec> SolutionBundle::target(int level, std::size_t node) const {
  return Eigen::Map<const Vec>(levels_.at(level).target.data() + node * m_, m_);
}
Eigen::Map<const Vec> SolutionBundle::drift(int level, std::size_t node) const {
  return Eigen::Map<const Vec>(levels_.at(level).drift.data() + node * m_, m_);
}
Eigen::Map<const Vec> SolutionBundle::shift(int level, std::size_t node) const {
  return Eigen::Map<const Vec>(levels_.at(level).shift.data() + node * m_, m_);
}

bool SolutionBundle::operator==(const SolutionBundle& o) const {
  if (m_ != o.m_ || d_ != o.d_ || k_ != o.k_ || levels_.size() != o.levels_.size()) return false;
  auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  };
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const auto &a = levels_[l], &b = o.levels_[l];
    if (!same(a.y, b.y) || !same(a.z, b.z) || !same(a.v, b.v) || !same(a.k, b.k) ||
        !same(a.dk, b.dk) || !same(a.target, b.target) ||
        !same(a.drift, b.drift) || !same(a.shift, b.shift))
      return false;
  }
  return true;
}

namespace {

// Bodies in force at a level: one shared body or one per node.
using BodiesAt = std::function<std::vector<ConvexBody>(int level)>;

std::vector<ConvexBody> bodies_for(const ScenarioSet& scen, int level,
                                   const std::function<ConvexBody(double, const NoiseHistory&)>& at,
                                   bool adapted, Exec exec) {
  const double t = scen.time(level);
  if (!adapted) return {at(t, NoiseHistory{})};
  std::vector<ConvexBody> out(scen.nodes(level), ConvexBody::ball(Vec::Zero(1), 1.0));
  kernels::for_each_index(exec, out.size(),
                          [&](std::size_t i) { out[i] = at(t, NoiseHistory(scen, level, i)); });
  return out;
}

void check_setup(const BsdeProblem& problem, const ScenarioSet& scen, int domain_dim, double horizon) {
  if (problem.d != scen.brownian_dim())
    throw DimensionMismatch("problem Brownian dimension", scen.brownian_dim(), problem.d);
  if (problem.k_marks != scen.mark_count())
    throw DimensionMismatch("problem mark count", scen.mark_count(), problem.k_marks);
  if (problem.m != domain_dim) throw DimensionMismatch("domain dimension", problem.m, domain_dim);
  if (!problem.terminal) throw InvalidArgument("problem: terminal functional required");
  if (std::abs(scen.model().horizon - horizon) > 1e-12)
    throw InvalidArgument("scenario horizon differs from the domain horizon");
  if (!(problem.lipschitz >= 0.0)) throw InvalidArgument("problem: Lipschitz constant must be >= 0");
  if (!(problem.lipschitz * scen.step() < 0.5))
    throw AssumptionViolation("stability-guard", "C h = " + std::to_string(problem.lipschitz * scen.step()) +
                                                     " must be < 1/2 for the explicit driver step");
  check_driver_at_zero(problem, uniform_grid(horizon, scen.steps()));
  check_lipschitz(problem, horizon);
}

// Shared backward induction. `project_at(level)` returns the bodies onto
// which the values at `level` are projected before being used as
// continuation values (composer breakpoints), or an empty vector.
SolutionBundle backward(const BsdeProblem& problem, const ScenarioSet& scen, double n_level,
                        const BodiesAt& bodies_at, const BodiesAt& project_at,
                        const std::function<ConvexBody(const NoiseHistory&)>& terminal_body,
                        SolverOptions opts) {
  if (!(n_level > 0.0)) throw InvalidArgument("solver: n_level must be > 0");
  const int m = problem.m, d = problem.d, kk = problem.k_marks;
  const int n_steps = scen.steps();
  const double h = scen.step();
  SolutionBundle sol(scen, m, n_level);

  {
    SolutionLevel& last = sol.level(n_steps);
    const std::size_t n = scen.nodes(n_steps);
    kernels::for_each_index(opts.exec, n, [&](std::size_t i) {
      const NoiseHistory hist(scen, n_steps, i);
      const Vec xi = problem.terminal(hist);
      if (xi.size() != m) throw DimensionMismatch("terminal value", m, xi.size());
      if (!xi.allFinite() || !terminal_body(hist).contains(xi, kPolicy.geometry))
        throw AssumptionViolation("H1", "terminal value outside D_T at leaf " + std::to_string(i));
      for (int r = 0; r < m; ++r) {
        last.y[i * m + r] = xi(r);
        last.target[i * m + r] = xi(r);
      }
    });
  }

  std::vector<double> v_scale(kk);
  for (int k = 0; k < kk; ++k) {
    const double lh = scen.model().marks[k].intensity * h;
    v_scale[k] = lh * (1.0 - lh);
  }
  const double weight = std::isinf(n_level) ? kReflected : n_level * h;
  const std::size_t width = static_cast<std::size_t>(m) * (1 + d + kk);

  for (int level = n_steps - 1; level >= 0; --level) {
    SolutionLevel& nx = sol.level(level + 1);
    const std::size_t n_next = scen.nodes(level + 1);

    std::vector<double> cont = nx.y;
    const std::vector<ConvexBody> proj = project_at(level + 1);
    if (!proj.empty()) {
      kernels::for_each_index(opts.exec, n_next, [&](std::size_t i) {
        const ConvexBody& b = proj.size() == 1 ? proj[0] : proj[i];
        const Vec p = b.project(Eigen::Map<const Vec>(nx.y.data() + i * m, m));
        for (int r = 0; r < m; ++r) {
          cont[i * m + r] = p(r);
          nx.shift[i * m + r] = p(r) - nx.y[i * m + r];
        }
      });
    }

    std::vector<double> aug(n_next * width);
    const ScenarioLevel& sl = scen.level(level + 1);
    kernels::for_each_index(opts.exec, n_next, [&](std::size_t i) {
      double* row = aug.data() + i * width;
      const double* yv = cont.data() + i * m;
      for (int r = 0; r < m; ++r) row[r] = yv[r];
      for (int c = 0; c < d; ++c)
        for (int r = 0; r < m; ++r) row[m + c * m + r] = yv[r] * sl.dw[i * d + c];
      for (int k = 0; k < kk; ++k)
        for (int r = 0; r < m; ++r) row[m + m * d + k * m + r] = yv[r] * sl.dnu[i * kk + k];
    });

    const std::size_t n_here = scen.nodes(level);
    std::vector<double> moments(n_here * width);
    conditional_expectation(scen, level, aug, static_cast<int>(width), moments, opts.exec);

    const std::vector<ConvexBody> bodies = bodies_at(level);
    SolutionLevel& cur = sol.level(level);
    kernels::BackwardStepArgs a;
    a.nodes = n_here;
    a.m = m;
    a.d = d;
    a.k_marks = kk;
    a.t = scen.time(level);
    a.step = h;
    a.penalty_weight = weight;
    a.moments = moments;
    a.v_scale = v_scale;
    a.bodies = bodies;
    a.driver = problem.driver ? &problem.driver : nullptr;
    a.y = cur.y;
    a.z = cur.z;
    a.v = cur.v;
    a.dk = cur.dk;
    a.target = cur.target;
    a.drift = cur.drift;
    kernels::backward_step(opts.exec, a);
  }

  // K_0 = 0, K_{k+1} = K_k + dK_k along each path.
  for (int level = 0; level < n_steps; ++level) {
    const SolutionLevel& cur = sol.level(level);
    SolutionLevel& nx = sol.level(level + 1);
    kernels::for_each_index(opts.exec, scen.nodes(level + 1), [&](std::size_t i) {
      const std::size_t p = scen.parent(level + 1, i);
      for (int r = 0; r < m; ++r) nx.k[i * m + r] = cur.k[p * m + r] + cur.dk[p * m + r];
    });
  }
  return sol;
}

}  // namespace

void validate_problem(const BsdeProblem& problem, const DomainPath& domain, const ScenarioSet& scen) {
  check_setup(problem, scen, domain.dim(), domain.horizon());
  const int n = scen.steps();
  kernels::for_each_index(Exec::Parallel, scen.nodes(n), [&](std::size_t i) {
    const NoiseHistory hist(scen, n, i);
    const Vec xi = problem.terminal(hist);
    if (xi.size() != problem.m) throw DimensionMismatch("terminal value", problem.m, xi.size());
    if (!xi.allFinite() || !domain.at(domain.horizon(), hist).contains(xi, kPolicy.geometry))
      throw AssumptionViolation("H1", "terminal value outside D_T at leaf " + std::to_string(i));
  });
}

SolutionBundle solve_penalized(const BsdeProblem& problem, const DomainPath& domain,
                               const ScenarioSet& scen, double n_level, SolverOptions opts) {
  check_setup(problem, scen, domain.dim(), domain.horizon());
  auto at = [&](double t, const NoiseHistory& hh) { return domain.at(t, hh); };
  return backward(
      problem, scen, n_level,
      [&](int level) { return bodies_for(scen, level, at, domain.adapted(), opts.exec); },
      [](int) { return std::vector<ConvexBody>{}; },
      [&](const NoiseHistory& hh) { return domain.at(domain.horizon(), hh); }, opts);
}

SolutionBundle solve_reflected_discrete(const BsdeProblem& problem, const DomainPath& domain,
                                        const ScenarioSet& scen, SolverOptions opts) {
  return solve_penalized(problem, domain, scen, kReflected, opts);
}

SolutionBundle solve_piecewise_constant(const BsdeProblem& problem, const DiscretizedDomainPath& disc,
                                        const ScenarioSet& scen, double n_level, SolverOptions opts) {
  const DomainPath& src = disc.source();
  check_setup(problem, scen, src.dim(), src.horizon());
  const double h = scen.step();
  std::vector<bool> is_break(scen.steps() + 1, false);
  for (std::size_t i = 1; i < disc.breakpoints().size(); ++i) {
    const double x = disc.breakpoints()[i] / h;
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9)
      throw InvalidArgument("piecewise solve: breakpoint " + std::to_string(disc.breakpoints()[i]) +
                            " is not on the scenario grid");
    is_break[static_cast<int>(r)] = true;
  }
  auto at = [&](double t, const NoiseHistory& hh) { return disc.at(t, hh); };
  // Values at a breakpoint level feed the interval to its left, so they are
  // projected onto that interval's body, read at the node's own history.
  auto project = [&](int level) -> std::vector<ConvexBody> {
    if (!is_break[level]) return {};
    const double left = disc.frozen_time(scen.time(level - 1));
    auto frozen = [&](double, const NoiseHistory& hh) { return src.at(left, hh); };
    if (!src.adapted()) return {frozen(0.0, NoiseHistory{})};
    std::vector<ConvexBody> out(scen.nodes(level), ConvexBody::ball(Vec::Zero(1), 1.0));
    kernels::for_each_index(opts.exec, out.size(),
                            [&](std::size_t i) { out[i] = frozen(0.0, NoiseHistory(scen, level, i)); });
    return out;
  };
  return backward(
      problem, scen, n_level,
      [&](int level) { return bodies_for(scen, level, at, src.adapted(), opts.exec); }, project,
      [&](const NoiseHistory& hh) { return src.at(src.horizon(), hh); }, opts);
}

}  // namespace rbsde
