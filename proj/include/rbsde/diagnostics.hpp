#pragma once

#include <iosfwd>
#include <vector>

#include "rbsde/solver.hpp"

namespace rbsde {

// Adapted D-valued test process for the minimality condition.
using TestProcess = std::function<Vec(double t, const NoiseHistory&)>;

// E[ sup|Y|^2 + sum h|Z|^2 + sum h sum_k lambda_k |V_k|^2 + sup|K|^2
//    + sum dist(A, boundary D) |dK| ].
double apriori_aggregate(const SolutionBundle& sol, const DomainPath& domain, const ScenarioSet& scen);

struct StabilityGap {
  double sup_sq = 0.0;    // E sup_t |Y - Y'|^2
  double gap = 0.0;       // sup_t hausdorff(D_t, D'_t)
  double tv_a = 0.0;      // E sum |dK|
  double tv_b = 0.0;      // E sum |dK'|
  double rhs = 0.0;       // gap (tv_a + tv_b)
  double ratio = 0.0;     // sup_sq / rhs (0 when both vanish)
};

StabilityGap stability_gap(const SolutionBundle& a, const SolutionBundle& b, const DomainPath& dom_a,
                           const DomainPath& dom_b, const ScenarioSet& scen, int n_dirs = 64);

// Largest sum_t <Y_t - X_t, dK_t> over paths. Throws InvalidArgument when X
// leaves the domain.
double skorokhod_residual(const SolutionBundle& sol, const DomainPath& domain, const ScenarioSet& scen,
                          const TestProcess& x);

// Largest sum_t <Y_t - A_t, dK_t> + beta sum_t |dK_t| over paths, with A the
// interior process; the minimality bound asks for this to be <= 1e-8.
double skorokhod_margin_excess(const SolutionBundle& sol, const DomainPath& domain,
                               const ScenarioSet& scen, double beta);

struct FlatOffReport {
  std::size_t active_steps = 0;   // nodes with dK != 0
  double max_contact = 0.0;       // max distance of Y to the boundary on those nodes
  bool passed = true;
};

FlatOffReport flat_off(const SolutionBundle& sol, const DomainPath& domain, const ScenarioSet& scen);

// max over nodes of dist(Y_t, D_t).
double max_violation(const SolutionBundle& sol, const DomainPath& domain, const ScenarioSet& scen);

// max over nodes of |Y - Y'|.
double sup_gap(const SolutionBundle& a, const SolutionBundle& b);

struct ItoTanakaReport {
  double q = 2.0;
  std::vector<double> residual;    // per path: RHS - LHS of the inequality on [0, T]
  std::vector<double> tolerance;   // per path: 5 sqrt(h) sup_t |Y - Y'|^q
  double pass_fraction = 0.0;      // share of paths with residual >= -tolerance
  double weighted_pass = 0.0;      // same, weighted by path probability
  double min_residual = 0.0;
  bool passed = false;             // pass_fraction >= 0.95
};

// Discrete form of the L^q Ito-Tanaka inequality for Y - Y' between t = 0
// and T, with the martingale terms taken from the realized increments.
ItoTanakaReport ito_tanaka_residual(const SolutionBundle& a, const SolutionBundle& b,
                                    const ScenarioSet& scen, double q);

struct ConvergenceRow {
  double n_level = 0.0;
  double violation = 0.0;
  double gap = 0.0;        // sup |Y^n - Y^refl|
  double tv = 0.0;         // E sum |dK^n|
  double skorokhod = 0.0;  // skorokhod_residual against A
  double apriori = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double reflected_apriori = 0.0;
  double gap_slope = 0.0;        // log-log least squares, NaN with < 2 positive points
  double violation_slope = 0.0;
};

// One row from a penalized solution and the reflected reference.
ConvergenceRow convergence_row(const SolutionBundle& sol, const SolutionBundle& reflected,
                               const DomainPath& domain, const ScenarioSet& scen);
// Fills the fitted slopes from the rows.
void fit_slopes(ConvergenceReport& rep);

ConvergenceReport convergence_report(const BsdeProblem& problem, const DomainPath& domain,
                                     const ScenarioSet& scen, const std::vector<double>& n_levels,
                                     SolverOptions opts = {});

// Slope of log y against log x over the points with y > 0.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// "%.17g"
std::string format_double(double x);

// time, E|Y|^2, E|Z|^2, E|V|^2, E|K|, max violation.
void write_solution_summary(std::ostream& os, const SolutionBundle& sol, const DomainPath& domain,
                            const ScenarioSet& scen);
void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep);

}  // namespace rbsde
