#include "rbsde/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

namespace rbsde {

namespace {

// Bodies of a domain at one level: shared for deterministic motions, one per
// node for adapted ones.
std::vector<ConvexBody> level_bodies(const DomainPath& dom, const ScenarioSet& scen, int level) {
  const double t = scen.time(level);
  if (!dom.adapted()) return {dom.at(t)};
  std::vector<ConvexBody> out(scen.nodes(level), ConvexBody::ball(Vec::Zero(1), 1.0));
  kernels::for_each_index(Exec::Parallel, out.size(),
                          [&](std::size_t i) { out[i] = dom.at(t, NoiseHistory(scen, level, i)); });
  return out;
}

const ConvexBody& pick(const std::vector<ConvexBody>& b, std::size_t i) { return b.size() == 1 ? b[0] : b[i]; }

// Accumulates `width` numbers along every path: fn(level, node, parent_acc,
// acc) fills the accumulator of `node` from its parent's (zeros at the root).
// Returns the leaf accumulators, nodes(N) x width.
template <class Fn>
std::vector<double> fold_paths(const ScenarioSet& scen, int width, Fn&& fn) {
  std::vector<double> prev(scen.nodes(0) * width, 0.0);
  std::vector<double> zeros(width, 0.0);
  for (std::size_t i = 0; i < scen.nodes(0); ++i) fn(0, i, zeros.data(), prev.data() + i * width);
  for (int level = 1; level <= scen.steps(); ++level) {
    std::vector<double> cur(scen.nodes(level) * width);
    kernels::for_each_index(Exec::Parallel, scen.nodes(level), [&](std::size_t i) {
      const std::size_t p = scen.parent(level, i);
      fn(level, i, prev.data() + p * width, cur.data() + i * width);
    });
    prev.swap(cur);
  }
  return prev;
}

void check_pair(const SolutionBundle& a, const SolutionBundle& b, const ScenarioSet& scen) {
  if (a.m() != b.m() || a.steps() != b.steps() || a.steps() != scen.steps())
    throw InvalidArgument("diagnostics: solutions live on different scenarios");
  for (int l = 0; l <= scen.steps(); ++l)
    if (a.nodes(l) != scen.nodes(l) || b.nodes(l) != scen.nodes(l))
      throw InvalidArgument("diagnostics: solutions live on different scenarios");
}

void check_one(const SolutionBundle& a, const ScenarioSet& scen) { check_pair(a, a, scen); }

double leaf_mean(const ScenarioSet& scen, const std::vector<double>& leaf, int width, int col) {
  std::vector<double> v(scen.nodes(scen.steps()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = leaf[i * width + col];
  return expectation(scen, scen.steps(), v);
}

}  // namespace

double apriori_aggregate(const SolutionBundle& sol, const DomainPath& domain, const ScenarioSet& scen) {
  check_one(sol, scen);
  const int n = scen.steps();
  const double h = scen.step();
  std::vector<double> lambda(scen.mark_count());
  for (int k = 0; k < scen.mark_count(); ++k) lambda[k] = scen.model().marks[k].intensity;
  std::vector<std::vector<ConvexBody>> bodies(n);
  for (int l = 0; l < n; ++l) bodies[l] = level_bodies(domain, scen, l);

  // [sup|Y|^2, sum h|Z|^2, sum h lambda|V|^2, sup|K|^2, sum margin |dK|]
  const auto acc = fold_paths(scen, 5, [&](int level, std::size_t i, const double* p, double* a) {
    a[0] = std::max(p[0], sol.y(level, i).squaredNorm());
    a[3] = std::max(p[3], sol.k(level, i).squaredNorm());
    a[1] = p[1];
    a[2] = p[2];
    a[4] = p[4];
    // Step terms of the parent interval [t_{l-1}, t_l].
    if (level > 0) {
      const std::size_t par = scen.parent(level, i);
      const int pl = level - 1;
      a[1] += h * sol.z(pl, par).squaredNorm();
      const auto v = sol.v(pl, par);
      for (int k = 0; k < scen.mark_count(); ++k) a[2] += h * lambda[k] * v.col(k).squaredNorm();
      const double dk = sol.dk(pl, par).norm();
      if (dk > 0.0) {
        const NoiseHistory hist(scen, pl, par);
        a[4] += pick(bodies[pl], par).boundary_margin(domain.interior(scen.time(pl), hist)) * dk;
      }
    }
  });
  std::vector<double> total(scen.nodes(n));
  for (std::size_t i = 0; i < total.size(); ++i)
    total[i] = acc[i * 5] + acc[i * 5 + 1] + acc[i * 5 + 2] + acc[i * 5 + 3] + acc[i * 5 + 4];
  return expectation(scen, n, total);
}

StabilityGap stability_gap(const SolutionBundle& a, const SolutionBundle& b, const DomainPath& dom_a,
                           const DomainPath& dom_b, const ScenarioSet& scen, int n_dirs) {
  check_pair(a, b, scen);
  StabilityGap g;
  // [sup|Y - Y'|^2, sum|dK|, sum|dK'|]
  const auto acc = fold_paths(scen, 3, [&](int level, std::size_t i, const double* p, double* o) {
    o[0] = std::max(p[0], (a.y(level, i) - b.y(level, i)).squaredNorm());
    o[1] = p[1];
    o[2] = p[2];
    if (level > 0) {
      const std::size_t par = scen.parent(level, i);
      o[1] += a.dk(level - 1, par).norm();
      o[2] += b.dk(level - 1, par).norm();
    }
  });
  g.sup_sq = leaf_mean(scen, acc, 3, 0);
  g.tv_a = leaf_mean(scen, acc, 3, 1);
  g.tv_b = leaf_mean(scen, acc, 3, 2);
  for (int l = 0; l <= scen.steps(); ++l) {
    const auto ba = level_bodies(dom_a, scen, l);
    const auto bb = level_bodies(dom_b, scen, l);
    const std::size_t n = std::max(ba.size(), bb.size());
    for (std::size_t i = 0; i < n; ++i) g.gap = std::max(g.gap, hausdorff(pick(ba, i), pick(bb, i), n_dirs));
  }
  g.rhs = g.gap * (g.tv_a + g.tv_b);
  if (g.rhs > 0.0)
    g.ratio = g.sup_sq / g.rhs;
  else
    g.ratio = g.sup_sq > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return g;
}

double skorokhod_residual(const SolutionBundle& sol, const DomainPath& domain, const ScenarioSet& scen,
                          const TestProcess& x) {
  check_one(sol, scen);
  const int n = scen.steps();
  std::vector<std::vector<ConvexBody>> bodies(n);
  for (int l = 0; l < n; ++l) bodies[l] = level_bodies(domain, scen, l);
  const auto acc = fold_paths(scen, 1, [&](int level, std::size_t i, const double* p, double* o) {
    o[0] = p[0];
    if (level == 0) return;
    const int pl = level - 1;
    const std::size_t par = scen.parent(level, i);
    const auto dk = sol.dk(pl, par);
    if (dk.isZero(0.0)) return;
    const Vec xv = x(scen.time(pl), NoiseHistory(scen, pl, par));
    if (!pick(bodies[pl], par).contains(xv, kPolicy.geometry))
      throw InvalidArgument("skorokhod_residual: test process leaves the domain");
    o[0] += (sol.y(pl, par) - xv).dot(dk);
  });
  return *std::max_element(acc.begin(), acc.end());
}

double skorokhod_margin_excess(const SolutionBundle& sol, const DomainPath& domain,
                               const ScenarioSet& scen, double beta) {
  check_one(sol, scen);
  const auto acc = fold_paths(scen, 1, [&](int level, std::size_t i, const double* p, double* o) {
    o[0] = p[0];
    if (level == 0) return;
    const int pl = level - 1;
    const std::size_t par = scen.parent(level, i);
    const auto dk = sol.dk(pl, par);
    if (dk.isZero(0.0)) return;
    const Vec av = domain.interior(scen.time(pl), NoiseHistory(scen, pl, par));
    o[0] += (sol.y(pl, par) - av).dot(dk) + beta * dk.norm();
  });
  return *std::max_element(acc.begin(), acc.end());
}

FlatOffReport flat_off(const SolutionBundle& sol, const DomainPath& domain, const ScenarioSet& scen) {
  check_one(sol, scen);
  FlatOffReport rep;
  for (int l = 0; l < scen.steps(); ++l) {
    const auto bodies = level_bodies(domain, scen, l);
    for (std::size_t i = 0; i < scen.nodes(l); ++i) {
      if (sol.dk(l, i).isZero(0.0)) continue;
      ++rep.active_steps;
      const ConvexBody& b = pick(bodies, i);
      const Vec y = sol.y(l, i);
      const double contact = b.contains(y, kPolicy.geometry) ? b.boundary_margin(y) : b.distance(y);
      rep.max_contact = std::max(rep.max_contact, contact);
    }
  }
  rep.passed = rep.max_contact <= kPolicy.boundary_contact;
  return rep;
}

double max_violation(const SolutionBundle& sol, const DomainPath& domain, const ScenarioSet& scen) {
  check_one(sol, scen);
  double worst = 0.0;
  for (int l = 0; l <= scen.steps(); ++l) {
    const auto bodies = level_bodies(domain, scen, l);
    for (std::size_t i = 0; i < scen.nodes(l); ++i)
      worst = std::max(worst, pick(bodies, i).distance(sol.y(l, i)));
  }
  return worst;
}

double sup_gap(const SolutionBundle& a, const SolutionBundle& b) {
  if (a.m() != b.m() || a.steps() != b.steps()) throw InvalidArgument("sup_gap: solutions differ in shape");
  double worst = 0.0;
  for (int l = 0; l <= a.steps(); ++l) {
    const auto& ya = a.level(l).y;
    const auto& yb = b.level(l).y;
    if (ya.size() != yb.size()) throw InvalidArgument("sup_gap: solutions differ in shape");
    for (std::size_t i = 0; i < a.nodes(l); ++i)
      worst = std::max(worst, (a.y(l, i) - b.y(l, i)).norm());
  }
  return worst;
}

ItoTanakaReport ito_tanaka_residual(const SolutionBundle& a, const SolutionBundle& b,
                                    const ScenarioSet& scen, double q) {
  if (!(q > 1.0 && q <= 2.0)) throw InvalidArgument("ito_tanaka_residual: q must lie in (1, 2]");
  check_pair(a, b, scen);
  const double h = scen.step();
  const double cq = q * std::min(q - 1.0, 1.0) / 2.0;
  const int kk = scen.mark_count();
  auto pw = [&](const Vec& y, double e) { return std::pow(y.norm(), e); };

  // [sum of step residuals, sup |Ybar|^q]
  const auto acc = fold_paths(scen, 2, [&](int level, std::size_t i, const double* p, double* o) {
    const Vec yl = a.y(level, i) - b.y(level, i);
    o[1] = std::max(p[1], pw(yl, q));
    o[0] = p[0];
    if (level == 0) return;
    const int pl = level - 1;
    const std::size_t par = scen.parent(level, i);
    const Vec y = a.y(pl, par) - b.y(pl, par);
    // Continuation value: composer solutions restart from the projected value.
    const Vec yn = yl + a.shift(level, i) - b.shift(level, i);
    const double ny = y.norm();
    const Vec grad = ny > 0.0 ? Vec(q * std::pow(ny, q - 2.0) * y) : Vec::Zero(y.size());
    const Mat zb = a.z(pl, par) - b.z(pl, par);
    const Mat vb = a.v(pl, par) - b.v(pl, par);
    const Vec drift = a.drift(pl, par) - b.drift(pl, par);
    const Vec dkb = a.dk(pl, par) - b.dk(pl, par);
    const Vec dw = scen.brownian_increment(level, i);
    const Vec dnu = scen.compensated_jump(level, i);

    double r = pw(yn, q) - pw(y, q);
    r += grad.dot(drift);
    // Realized martingale increment: Z dW + V dnu plus whatever part of
    // Y_{k+1} - E_k the discrete filtration leaves orthogonal to them.
    r -= grad.dot(yn - y + drift + dkb);
    (void)dw, (void)dnu;
    r += grad.dot(dkb);
    if (ny > 0.0) {
      r -= cq * h * std::pow(ny, q - 2.0) * zb.squaredNorm();
      const auto cnt = scen.jump_counts(level, i);
      const auto pcnt = scen.jump_counts(pl, par);
      for (int k = 0; k < kk; ++k) {
        const int jumps = cnt(k) - pcnt(k);
        if (jumps <= 0) continue;
        const Vec vk = vb.col(k);
        const double base = std::max(y.squaredNorm(), (y + vk).squaredNorm());
        r -= cq * jumps * vk.squaredNorm() * std::pow(base, q / 2.0 - 1.0);
      }
    }
    o[0] += r;
  });

  ItoTanakaReport rep;
  rep.q = q;
  const int n = scen.steps();
  const std::size_t leaves = scen.nodes(n);
  rep.residual.resize(leaves);
  rep.tolerance.resize(leaves);
  rep.min_residual = std::numeric_limits<double>::infinity();
  std::size_t ok = 0;
  double wok = 0.0;
  for (std::size_t i = 0; i < leaves; ++i) {
    rep.residual[i] = acc[i * 2];
    rep.tolerance[i] = 5.0 * std::sqrt(h) * acc[i * 2 + 1];
    rep.min_residual = std::min(rep.min_residual, rep.residual[i]);
    if (rep.residual[i] >= -rep.tolerance[i]) {
      ++ok;
      wok += scen.node_weight(n, i);
    }
  }
  rep.pass_fraction = static_cast<double>(ok) / static_cast<double>(leaves);
  rep.weighted_pass = wok;
  rep.passed = rep.pass_fraction >= 0.95;
  return rep;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

ConvergenceRow convergence_row(const SolutionBundle& sol, const SolutionBundle& reflected,
                               const DomainPath& domain, const ScenarioSet& scen) {
  ConvergenceRow row;
  row.n_level = sol.n_level();
  row.violation = max_violation(sol, domain, scen);
  row.gap = sup_gap(sol, reflected);
  const auto acc = fold_paths(scen, 1, [&](int level, std::size_t i, const double* p, double* o) {
    o[0] = p[0];
    if (level > 0) o[0] += sol.dk(level - 1, scen.parent(level, i)).norm();
  });
  row.tv = leaf_mean(scen, acc, 1, 0);
  const TestProcess interior = [&](double t, const NoiseHistory& hh) { return domain.interior(t, hh); };
  row.skorokhod = skorokhod_residual(sol, domain, scen, interior);
  row.apriori = apriori_aggregate(sol, domain, scen);
  return row;
}

void fit_slopes(ConvergenceReport& rep) {
  std::vector<double> ns, gaps, viol;
  for (const auto& r : rep.rows) {
    ns.push_back(r.n_level);
    gaps.push_back(r.gap);
    viol.push_back(r.violation);
  }
  rep.gap_slope = loglog_slope(ns, gaps);
  rep.violation_slope = loglog_slope(ns, viol);
}

ConvergenceReport convergence_report(const BsdeProblem& problem, const DomainPath& domain,
                                     const ScenarioSet& scen, const std::vector<double>& n_levels,
                                     SolverOptions opts) {
  if (n_levels.empty()) throw InvalidArgument("convergence_report: no levels");
  for (std::size_t i = 1; i < n_levels.size(); ++i)
    if (!(n_levels[i] > n_levels[i - 1]))
      throw InvalidArgument("convergence_report: n levels must be strictly increasing");
  ConvergenceReport rep;
  const SolutionBundle refl = solve_reflected_discrete(problem, domain, scen, opts);
  rep.reflected_apriori = apriori_aggregate(refl, domain, scen);
  for (double n : n_levels)
    rep.rows.push_back(convergence_row(solve_penalized(problem, domain, scen, n, opts), refl, domain, scen));
  fit_slopes(rep);
  return rep;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_solution_summary(std::ostream& os, const SolutionBundle& sol, const DomainPath& domain,
                            const ScenarioSet& scen) {
  check_one(sol, scen);
  os << "time,E_Y2,E_Z2,E_V2,E_K,max_violation\n";
  for (int l = 0; l <= scen.steps(); ++l) {
    const std::size_t n = scen.nodes(l);
    std::vector<double> y2(n), z2(n), v2(n), kn(n);
    for (std::size_t i = 0; i < n; ++i) {
      y2[i] = sol.y(l, i).squaredNorm();
      z2[i] = sol.z(l, i).squaredNorm();
      v2[i] = sol.v(l, i).squaredNorm();
      kn[i] = sol.k(l, i).norm();
    }
    const auto bodies = level_bodies(domain, scen, l);
    double viol = 0.0;
    for (std::size_t i = 0; i < n; ++i) viol = std::max(viol, pick(bodies, i).distance(sol.y(l, i)));
    os << format_double(scen.time(l)) << ',' << format_double(expectation(scen, l, y2)) << ','
       << format_double(expectation(scen, l, z2)) << ',' << format_double(expectation(scen, l, v2)) << ','
       << format_double(expectation(scen, l, kn)) << ',' << format_double(viol) << '\n';
  }
}

void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep) {
  os << "n_level,max_violation,sup_gap_to_reflected,total_variation,skorokhod_residual,apriori_aggregate\n";
  for (const auto& r : rep.rows)
    os << format_double(r.n_level) << ',' << format_double(r.violation) << ',' << format_double(r.gap) << ','
       << format_double(r.tv) << ',' << format_double(r.skorokhod) << ',' << format_double(r.apriori) << '\n';
}

}  // namespace rbsde
