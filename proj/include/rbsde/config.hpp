#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rbsde/noise.hpp"

namespace rbsde {

// f = a y + b sum_c z_c + c sum_k v_k, optionally passed through tanh.
struct DriverSpec {
  std::string kind = "zero";  // zero | linear | lipschitz-saturating
  double a = 0.0, b = 0.0, c = 0.0;
};

struct TerminalSpec {
  std::string kind = "brownian";  // brownian | clipped-brownian | jump-compensated | custom-affine
  double scale = 1.0;
  bool clip = false;  // project the value onto D_T (implied by clipped-brownian)
  // custom-affine: xi = offset + w_coef W_T + j_coef J_T
  Vec offset;
  Mat w_coef;
  Mat j_coef;
};

struct DomainSpec {
  std::string shape = "ball";     // ball | box | polytope
  std::string motion = "static";  // static | moving | adapted
  Vec center;
  double radius = 1.0;
  Vec lower, upper;
  Mat normals;
  Vec offsets;
  Vec velocity;            // translation speed of the body (moving, adapted)
  double radius_rate = 0.0;
  double gain = 0.0;       // adapted ball: center moves by gain * W_t
  std::string interior = "center";  // "center" or "point"
  Vec interior_point;
};

struct RunSpec {
  ScenarioMode mode = ScenarioMode::Tree;
  std::size_t paths = 4096;
  std::uint64_t seed = 1;
  std::vector<double> levels{4, 16, 64, 256};
  std::vector<double> ito_q{1.5, 2.0};
};

struct ExperimentConfig {
  std::string name = "experiment";
  int m = 1;
  DriverSpec driver;
  std::optional<double> lipschitz;  // declared C; derived from the driver when absent
  TerminalSpec terminal;
  DomainSpec domain;
  NoiseModel noise;
  RunSpec run;
};

// Parses the TOML config. Unknown sections or keys are rejected.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

// Effective config (after overrides) as TOML, for reproducibility.
std::string echo_config(const ExperimentConfig& cfg);

}  // namespace rbsde
