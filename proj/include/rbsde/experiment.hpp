#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rbsde/config.hpp"
#include "rbsde/diagnostics.hpp"

namespace rbsde {

// Preset builders. Vectors shorter than m (W_T, mark values) are embedded in
// the leading coordinates.
BsdeProblem make_problem(const ExperimentConfig& cfg);
DomainPath make_domain(const ExperimentConfig& cfg);
ScenarioSet make_scenarios(const ExperimentConfig& cfg, Exec exec = Exec::Parallel);

// Declared Lipschitz constant of a driver preset: max(|a|, |b| sqrt d, |c| sqrt K).
double driver_lipschitz(const DriverSpec& spec, int d, int k_marks);

struct CheckLine {
  std::string tag;
  bool passed = false;
  std::string detail;
  bool gating = true;  // informational lines never change the exit code
};

struct RunResult {
  int exit_code = 0;  // 0 all checks pass, 1 validation failure, 2 check failure
  std::string message;
  std::vector<CheckLine> checks;
};

// Validates, solves, runs the diagnostics and writes solution_*.csv,
// convergence.csv, report.txt and config_echo.toml into `out_dir`.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                         Exec exec = Exec::Parallel);

}  // namespace rbsde
