#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rbsde/diagnostics.hpp"

using namespace rbsde;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

NoiseModel grid(int steps, std::vector<double> lambdas = {}) {
  NoiseModel m;
  m.steps = steps;
  for (double l : lambdas) m.marks.push_back({v1(1.0), l});
  return m;
}

DomainPath static_domain(ConvexBody body) {
  const int m = body.dim();
  return DomainPath(motion::Static{std::move(body)}, 1.0,
                    [m](double, const NoiseHistory&) { return Vec::Zero(m); });
}

DomainPath clip_box(double half = 0.5) { return static_domain(ConvexBody::box(v1(-half), v1(half))); }

BsdeProblem clipped(double a = 2.0, double scale = 1.0, double clip = 0.5) {
  BsdeProblem p;
  p.terminal = [=](const NoiseHistory& h) { return Vec((scale * h.brownian_at(h.time())).cwiseMax(-clip).cwiseMin(clip)); };
  p.driver = [a](double, const Vec& y, const Mat&, const Mat&) { return Vec(a * y); };
  p.lipschitz = a;
  return p;
}

BsdeProblem brownian() {
  BsdeProblem p;
  p.terminal = [](const NoiseHistory& h) { return h.brownian_at(h.time()); };
  return p;
}

BsdeProblem zero_problem() {
  BsdeProblem p;
  p.terminal = [](const NoiseHistory&) { return v1(0.0); };
  return p;
}

// Node index of a d = 1, K = 0 tree from the Brownian history: one bit per
// step, set when the step went down.
std::size_t node_of(const NoiseHistory& h, double step, int level) {
  std::size_t idx = 0;
  for (int k = 1; k <= level; ++k) {
    const double dw = h.brownian_at(k * step)[0] - h.brownian_at((k - 1) * step)[0];
    idx = idx * 2 + (dw < 0 ? 1 : 0);
  }
  return idx;
}

}  // namespace

TEST_CASE("zero problem: every diagnostic vanishes") {
  const auto scen = build_tree(grid(6));
  const auto dom = static_domain(ConvexBody::ball(v1(0), 1));
  const auto a = solve_penalized(zero_problem(), dom, scen, 4);
  const auto b = solve_reflected_discrete(zero_problem(), dom, scen);
  CHECK(apriori_aggregate(a, dom, scen) == 0.0);
  CHECK(max_violation(a, dom, scen) == 0.0);
  CHECK(sup_gap(a, b) == 0.0);
  CHECK(skorokhod_margin_excess(b, dom, scen, 1.0) == 0.0);
  const auto it = ito_tanaka_residual(a, b, scen, 1.5);
  CHECK(it.min_residual == 0.0);
  CHECK(it.passed);
  const auto st = stability_gap(a, b, dom, dom, scen);
  CHECK(st.sup_sq == 0.0);
  CHECK(st.ratio == 0.0);
  const auto rep = convergence_report(zero_problem(), dom, scen, {4, 16});
  for (const auto& r : rep.rows) {
    CHECK(r.gap == 0.0);
    CHECK(r.violation == 0.0);
    CHECK(r.tv == 0.0);
    CHECK(r.skorokhod == 0.0);
    CHECK(r.apriori == 0.0);
  }
}

TEST_CASE("apriori aggregate of the Brownian martingale") {
  const int n = 6;
  const auto scen = build_tree(grid(n));
  const auto dom = static_domain(ConvexBody::ball(v1(0), 100));
  const auto sol = solve_penalized(brownian(), dom, scen, 4);
  // Oracle: E sup_t W_t^2 by enumerating the 2^N sign paths, plus T from Z = 1.
  const double sq = std::sqrt(1.0 / n);
  double e_sup = 0;
  for (int path = 0; path < (1 << n); ++path) {
    double w = 0, sup = 0;
    for (int k = 0; k < n; ++k) {
      w += ((path >> k) & 1) ? -sq : sq;
      sup = std::max(sup, w * w);
    }
    e_sup += sup / (1 << n);
  }
  CHECK(apriori_aggregate(sol, dom, scen) == doctest::Approx(e_sup + 1.0).epsilon(1e-12));
}

TEST_CASE("apriori aggregate is uniform over the penalization ladder") {
  const auto scen = build_tree(grid(8));
  const auto rep = convergence_report(clipped(), clip_box(), scen, {4, 16, 64, 256});
  double lo = 1e300, hi = 0;
  for (const auto& r : rep.rows) lo = std::min(lo, r.apriori), hi = std::max(hi, r.apriori);
  CHECK(lo > 0);
  CHECK(hi / lo <= 3.0);
}

TEST_CASE("stability gap") {
  const auto scen = build_tree(grid(8));
  SUBCASE("identical domains") {
    const auto dom = clip_box();
    const auto a = solve_reflected_discrete(clipped(), dom, scen);
    const auto g = stability_gap(a, a, dom, dom, scen);
    CHECK(g.gap == 0.0);
    CHECK(g.sup_sq == 0.0);
  }
  SUBCASE("ball ladder") {
    // xi = clip(2 W_T) onto [-1, 1] and f = 2y, against the same problem in [-1-delta, 1+delta].
    const auto base = static_domain(ConvexBody::ball(v1(0), 1));
    const auto a = solve_reflected_discrete(clipped(2.0, 2.0, 1.0), base, scen);
    for (double delta : {0.1, 0.05, 0.025}) {
      const auto wide = static_domain(ConvexBody::ball(v1(0), 1 + delta));
      const auto b = solve_reflected_discrete(clipped(2.0, 2.0, 1.0), wide, scen);
      const auto g = stability_gap(a, b, base, wide, scen);
      CHECK(g.gap == doctest::Approx(delta).epsilon(1e-12));
      // Ybar_T = 0 and each step adds at most delta to (1 + 2h) |Ybar_{t+h}|.
      double bound = 0;
      for (int k = 0; k < 8; ++k) bound = delta + (1 + 2 * scen.step()) * bound;
      CHECK(g.sup_sq <= bound * bound);
      CHECK(std::isfinite(g.ratio));
      MESSAGE("delta " << delta << ": E sup|Ybar|^2 = " << g.sup_sq << ", ratio = " << g.ratio);
    }
  }
}

TEST_CASE("skorokhod residuals") {
  const auto scen = build_tree(grid(8));
  const auto dom = clip_box();
  const auto sol = solve_reflected_discrete(clipped(), dom, scen);
  SUBCASE("K = 0") {
    const auto free = solve_reflected_discrete(brownian(), static_domain(ConvexBody::ball(v1(0), 100)), scen);
    CHECK(skorokhod_residual(free, static_domain(ConvexBody::ball(v1(0), 100)), scen,
                             [](double, const NoiseHistory&) { return v1(0); }) == 0.0);
  }
  SUBCASE("interior process with margin") {
    // A = 0 has margin 0.5 in [-0.5, 0.5].
    CHECK(skorokhod_margin_excess(sol, dom, scen, 0.5) <= 1e-8);
    const double r = skorokhod_residual(sol, dom, scen, [](double, const NoiseHistory&) { return v1(0); });
    CHECK(r <= 1e-8);
  }
  SUBCASE("X = Y") {
    const double h = scen.step();
    const TestProcess self = [&](double t, const NoiseHistory& hist) {
      const int level = static_cast<int>(std::lround(t / h));
      return Vec(sol.y(level, node_of(hist, h, level)));
    };
    CHECK(skorokhod_residual(sol, dom, scen, self) == 0.0);
  }
  SUBCASE("test process outside D") {
    CHECK_THROWS_AS(skorokhod_residual(sol, dom, scen, [](double, const NoiseHistory&) { return v1(3); }),
                    InvalidArgument);
  }
  SUBCASE("per-branch inequality by hand") {
    // sum <Y - A, dK> <= -beta sum |dK| on every leaf path.
    double worst = -1e300;
    for (std::size_t leaf = 0; leaf < scen.nodes(8); ++leaf) {
      double lhs = 0, tv = 0;
      std::size_t node = leaf;
      for (int l = 7; l >= 0; --l) {
        node = scen.parent(l + 1, node);
        lhs += sol.y(l, node).dot(sol.dk(l, node));
        tv += sol.dk(l, node).norm();
      }
      worst = std::max(worst, lhs + 0.5 * tv);
    }
    CHECK(worst <= 1e-8);
    CHECK(skorokhod_margin_excess(sol, dom, scen, 0.5) == doctest::Approx(worst).epsilon(1e-12));
  }
}

TEST_CASE("flat-off report") {
  const auto scen = build_tree(grid(8));
  const auto dom = clip_box();
  const auto refl = solve_reflected_discrete(clipped(), dom, scen);
  const auto fo = flat_off(refl, dom, scen);
  CHECK(fo.passed);
  CHECK(fo.active_steps > 0);
  CHECK(fo.max_contact <= 1e-10);
  // Penalized solutions sit outside D when K moves.
  CHECK_FALSE(flat_off(solve_penalized(clipped(), dom, scen, 4), dom, scen).passed);
}

TEST_CASE("ito-tanaka residual") {
  const auto scen = build_tree(grid(8));
  const auto dom = clip_box();
  const auto pen = solve_penalized(clipped(), dom, scen, 4);
  const auto refl = solve_reflected_discrete(clipped(), dom, scen);
  SUBCASE("Y = Y'") {
    const auto r = ito_tanaka_residual(refl, refl, scen, 2.0);
    for (double x : r.residual) CHECK(x == 0.0);
    CHECK(r.pass_fraction == 1.0);
  }
  SUBCASE("q = 2 is the discrete Ito expansion") {
    const auto r = ito_tanaka_residual(pen, refl, scen, 2.0);
    // Oracle: with q = 2 every first-order term cancels against the realized
    // increment and the residual is sum |dYbar|^2 - 1{Ybar != 0} h |Zbar|^2 per path.
    REQUIRE(r.residual.size() == scen.nodes(8));
    double worst = 0;
    for (std::size_t leaf = 0; leaf < scen.nodes(8); ++leaf) {
      double want = 0;
      std::size_t child = leaf;
      for (int l = 7; l >= 0; --l) {
        const std::size_t par = scen.parent(l + 1, child);
        const Vec d = (pen.y(l + 1, child) - refl.y(l + 1, child)) - (pen.y(l, par) - refl.y(l, par));
        const bool moving = (pen.y(l, par) - refl.y(l, par)).norm() != 0.0;
        want += d.squaredNorm() - (moving ? scen.step() * (pen.z(l, par) - refl.z(l, par)).squaredNorm() : 0.0);
        child = par;
      }
      worst = std::max(worst, std::abs(r.residual[leaf] - want));
    }
    CHECK(worst <= 1e-12);
    CHECK(r.pass_fraction >= 0.95);
    CHECK(r.passed);
  }
  SUBCASE("q = 1.5") {
    const auto r = ito_tanaka_residual(pen, refl, scen, 1.5);
    CHECK(r.pass_fraction >= 0.95);
    CHECK(r.weighted_pass >= 0.95);
  }
  CHECK_THROWS_AS(ito_tanaka_residual(pen, refl, scen, 1.0), InvalidArgument);
  CHECK_THROWS_AS(ito_tanaka_residual(pen, refl, scen, 2.5), InvalidArgument);
}

TEST_CASE("convergence report") {
  const auto scen = build_tree(grid(8));
  SUBCASE("penalty-inactive instance") {
    const auto rep = convergence_report(brownian(), static_domain(ConvexBody::ball(v1(0), 100)), scen, {4, 16, 64});
    for (const auto& r : rep.rows) CHECK(r.gap == 0.0);
  }
  SUBCASE("clipped-brownian ladder") {
    const auto rep = convergence_report(clipped(), clip_box(), scen, {4, 16, 64, 256});
    REQUIRE(rep.rows.size() == 4);
    for (std::size_t i = 1; i < 4; ++i) {
      CHECK(rep.rows[i].n_level > rep.rows[i - 1].n_level);
      CHECK(rep.rows[i].gap < rep.rows[i - 1].gap);
      CHECK(rep.rows[i].violation < rep.rows[i - 1].violation);
    }
    CHECK(rep.gap_slope >= -1.3);
    CHECK(rep.gap_slope <= -0.7);
    // Same tree, same levels: bitwise-equal rows.
    const auto again = convergence_report(clipped(), clip_box(), scen, {4, 16, 64, 256});
    std::ostringstream a, b;
    write_convergence_csv(a, rep);
    write_convergence_csv(b, again);
    CHECK(a.str() == b.str());
  }
  CHECK_THROWS_AS(convergence_report(clipped(), clip_box(), scen, {16, 4}), InvalidArgument);
  CHECK_THROWS_AS(convergence_report(clipped(), clip_box(), scen, {}), InvalidArgument);
}

TEST_CASE("loglog_slope") {
  std::vector<double> x{1, 2, 4, 8}, y;
  for (double v : x) y.push_back(3.0 / v);
  CHECK(loglog_slope(x, y) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(std::isnan(loglog_slope({1, 2}, {0, 0})));
}

TEST_CASE("format_double round-trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("solution summary CSV") {
  const auto scen = build_tree(grid(4));
  const auto dom = clip_box();
  const auto sol = solve_reflected_discrete(clipped(1.0), dom, scen);
  std::ostringstream os;
  write_solution_summary(os, sol, dom, scen);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "time,E_Y2,E_Z2,E_V2,E_K,max_violation");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 5);
}
