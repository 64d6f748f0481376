#include "rbsde/domain_path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rbsde {

namespace {

constexpr double kTimeTol = 1e-12;
constexpr double kGridTol = 1e-9;

int grid_index(double t, double step) {
  const double x = t / step;
  const double r = std::round(x);
  if (std::abs(x - r) > kGridTol) throw InvalidArgument("noise history: time is off the grid");
  return static_cast<int>(r);
}

}  // namespace

NoiseHistory::NoiseHistory(const ScenarioSet& scen, int level, std::size_t node)
    : src_(TreeRef{&scen, level, node}) {}

NoiseHistory::NoiseHistory(double step, std::vector<Vec> brownian,
                           std::vector<Eigen::VectorXi> jump_counts)
    : src_(Owned{step, std::make_shared<const std::vector<Vec>>(std::move(brownian)),
                 std::make_shared<const std::vector<Eigen::VectorXi>>(std::move(jump_counts))}) {
  if (!(step > 0.0)) throw InvalidArgument("noise history: step must be positive");
}

bool NoiseHistory::empty() const noexcept { return std::holds_alternative<std::monostate>(src_); }

double NoiseHistory::time() const {
  if (const auto* r = std::get_if<TreeRef>(&src_)) return r->scen->time(r->level);
  if (const auto* o = std::get_if<Owned>(&src_))
    return o->values->empty() ? -1.0 : o->step * static_cast<double>(o->values->size() - 1);
  return -1.0;
}

Vec NoiseHistory::brownian_at(double t) const {
  if (const auto* r = std::get_if<TreeRef>(&src_)) {
    const int idx = grid_index(t, r->scen->step());
    if (idx > r->level || idx < 0)
      throw InvalidArgument("noise history: insufficient history for time " + std::to_string(t));
    return r->scen->brownian(idx, r->scen->ancestor(r->level, r->node, idx));
  }
  if (const auto* o = std::get_if<Owned>(&src_)) {
    const int idx = grid_index(t, o->step);
    if (idx < 0 || idx >= static_cast<int>(o->values->size()))
      throw InvalidArgument("noise history: insufficient history for time " + std::to_string(t));
    return (*o->values)[idx];
  }
  throw InvalidArgument("noise history: adapted motion evaluated without a history");
}

Eigen::VectorXi NoiseHistory::jump_counts_at(double t) const {
  if (const auto* r = std::get_if<TreeRef>(&src_)) {
    const int idx = grid_index(t, r->scen->step());
    if (idx > r->level || idx < 0)
      throw InvalidArgument("noise history: insufficient history for time " + std::to_string(t));
    return r->scen->jump_counts(idx, r->scen->ancestor(r->level, r->node, idx));
  }
  if (const auto* o = std::get_if<Owned>(&src_)) {
    if (o->counts->empty()) return Eigen::VectorXi(0);
    const int idx = grid_index(t, o->step);
    if (idx < 0 || idx >= static_cast<int>(o->counts->size()))
      throw InvalidArgument("noise history: insufficient history for time " + std::to_string(t));
    return (*o->counts)[idx];
  }
  return Eigen::VectorXi(0);
}

DomainPath::DomainPath(Motion motion, double horizon, InteriorFn interior, double lipschitz)
    : motion_(std::move(motion)),
      horizon_(horizon),
      interior_(std::move(interior)),
      lipschitz_(lipschitz) {
  if (!(horizon_ > 0.0)) throw InvalidArgument("domain: horizon must be positive");
  if (!(lipschitz_ >= 0.0)) throw InvalidArgument("domain: Lipschitz constant must be >= 0");
  if (!interior_) throw InvalidArgument("domain: interior process required");
  dim_ = std::visit(
      [](const auto& mo) -> int {
        using T = std::decay_t<decltype(mo)>;
        if constexpr (std::is_same_v<T, motion::Static>) return mo.body.dim();
        if constexpr (std::is_same_v<T, motion::MovingBall>) return static_cast<int>(mo.center(0.0).size());
        if constexpr (std::is_same_v<T, motion::MovingPolytope>) return static_cast<int>(mo.normals.cols());
        if constexpr (std::is_same_v<T, motion::AdaptedBall>) return static_cast<int>(mo.base(0.0).size());
      },
      motion_);
}

void DomainPath::check_time(double t) const {
  if (!(t >= -kTimeTol && t <= horizon_ + kTimeTol))
    throw InvalidArgument("domain: time " + std::to_string(t) + " outside [0, T]");
}

ConvexBody DomainPath::at(double t, const NoiseHistory& history) const {
  check_time(t);
  return std::visit(
      [&](const auto& mo) -> ConvexBody {
        using T = std::decay_t<decltype(mo)>;
        if constexpr (std::is_same_v<T, motion::Static>) {
          return mo.body;
        } else if constexpr (std::is_same_v<T, motion::MovingBall>) {
          return ConvexBody::ball(mo.center(t), mo.radius(t));
        } else if constexpr (std::is_same_v<T, motion::MovingPolytope>) {
          return ConvexBody::polytope(mo.normals, mo.offsets(t));
        } else {
          return ConvexBody::ball(mo.base(t) + mo.gain(history.brownian_at(t)), mo.radius(t));
        }
      },
      motion_);
}

Vec DomainPath::interior(double t, const NoiseHistory& history) const {
  check_time(t);
  Vec a = interior_(t, history);
  if (a.size() != dim_) throw DimensionMismatch("interior process", dim_, a.size());
  return a;
}

DiscretizedDomainPath::DiscretizedDomainPath(DomainPath path, std::vector<double> breakpoints, int j)
    : path_(std::move(path)), breaks_(std::move(breakpoints)), j_(j) {
  if (breaks_.size() < 2 || breaks_.front() != 0.0 || breaks_.back() != path_.horizon())
    throw InvalidArgument("discretization: breakpoints must run from 0 to T");
  for (std::size_t i = 1; i < breaks_.size(); ++i)
    if (!(breaks_[i] > breaks_[i - 1])) throw InvalidArgument("discretization: breakpoints must increase");
}

std::size_t DiscretizedDomainPath::interval_of(double t) const {
  if (!(t >= -kTimeTol && t <= path_.horizon() + kTimeTol))
    throw InvalidArgument("discretization: time outside [0, T]");
  // Last i with sigma_i <= t, capped so T belongs to the final interval.
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t + kTimeTol);
  std::size_t i = static_cast<std::size_t>(std::distance(breaks_.begin(), it)) - 1;
  return std::min(i, intervals() - 1);
}

ConvexBody DiscretizedDomainPath::at(double t, const NoiseHistory& history) const {
  return path_.at(frozen_time(t), history);
}

std::vector<ConvexBody> DiscretizedDomainPath::bodies() const {
  if (path_.adapted()) throw InvalidArgument("discretization: bodies() needs a deterministic motion");
  std::vector<ConvexBody> out;
  for (std::size_t i = 0; i < intervals(); ++i) out.push_back(path_.at(breaks_[i]));
  return out;
}

DiscretizedDomainPath discretize(const DomainPath& path, int j, std::optional<std::vector<double>> widths) {
  if (j < 1) throw InvalidArgument("discretize: j must be >= 1");
  const double horizon = path.horizon();
  std::vector<double> br{0.0};
  if (!widths) {
    for (int i = 1;; ++i) {
      const double s = static_cast<double>(i) / j;
      if (s >= horizon - kTimeTol) {
        br.push_back(horizon);
        break;
      }
      br.push_back(s);
    }
    return DiscretizedDomainPath(path, std::move(br), j);
  }
  const double lo = 1.0 / j, hi = 2.0 / j;
  double s = 0.0;
  for (std::size_t i = 0; i < widths->size(); ++i) {
    const double a = (*widths)[i];
    const bool closes = s + a >= horizon - kTimeTol;
    const bool in_range = a >= lo - kTimeTol && a <= hi + kTimeTol;
    if (!(in_range || (closes && a > 0.0 && a <= hi + kTimeTol)))
      throw InvalidArgument("discretize: width " + std::to_string(a) + " outside [1/j, 2/j]");
    if (closes) {
      if (i + 1 != widths->size()) throw InvalidArgument("discretize: widths continue past T");
      br.push_back(horizon);
      return DiscretizedDomainPath(path, std::move(br), j);
    }
    s += a;
    br.push_back(s);
  }
  throw InvalidArgument("discretize: widths do not reach T");
}

double discretization_gap(const DomainPath& path, const DiscretizedDomainPath& disc,
                          std::span<const double> grid, const NoiseHistory& history, int n_dirs) {
  double gap = 0.0;
  for (double t : grid) gap = std::max(gap, hausdorff(disc.at(t, history), path.at(t, history), n_dirs));
  return gap;
}

MarginReport verify_h4(const DomainPath& path, std::span<const double> grid, const ScenarioSet* scen) {
  MarginReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  auto check = [&](double t, const NoiseHistory& hist) {
    const ConvexBody body = path.at(t, hist);
    const Vec a = path.interior(t, hist);
    if (!body.contains(a, kPolicy.geometry))
      throw AssumptionViolation("H4", "interior process leaves the domain at t = " + std::to_string(t));
    const double m = body.boundary_margin(a);
    if (m < rep.min_margin) {
      rep.min_margin = m;
      rep.time_at_min = t;
    }
  };
  for (double t : grid) {
    if (!scen) {
      check(t, NoiseHistory{});
      continue;
    }
    const int level = grid_index(t, scen->step());
    if (level < 0 || level > scen->steps()) throw InvalidArgument("verify_h4: grid time outside scenarios");
    for (std::size_t n = 0; n < scen->nodes(level); ++n) check(t, NoiseHistory(*scen, level, n));
  }
  rep.passed = rep.min_margin > 0.0;
  return rep;
}

MarginReport require_h4(const DomainPath& path, std::span<const double> grid, const ScenarioSet* scen) {
  MarginReport rep = verify_h4(path, grid, scen);
  if (!rep.passed)
    throw AssumptionViolation("H4", "interior margin <= 0 (minimum " + std::to_string(rep.min_margin) +
                                        " at t = " + std::to_string(rep.time_at_min) + ")");
  return rep;
}

std::vector<double> uniform_grid(double horizon, int n) {
  std::vector<double> g(n + 1);
  for (int k = 0; k <= n; ++k) g[k] = k == n ? horizon : horizon * k / n;
  return g;
}

}  // namespace rbsde
