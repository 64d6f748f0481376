#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rbsde/experiment.hpp"

using namespace rbsde;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
name = "t"
[problem]
m = 1
driver = "linear"
driver_params = [0.5, 0.0, 0.0]
terminal = "clipped-brownian"
[domain]
shape = "box"
lower = [-0.5]
upper = [0.5]
[noise]
d = 1
steps = 4
horizon = 1.0
[run]
levels = [4, 16]
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rbsde_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("parse_config reads every section") {
  const auto cfg = parse_config(kMinimal);
  CHECK(cfg.name == "t");
  CHECK(cfg.m == 1);
  CHECK(cfg.driver.kind == "linear");
  CHECK(cfg.driver.a == 0.5);
  CHECK(cfg.terminal.kind == "clipped-brownian");
  CHECK(cfg.domain.shape == "box");
  CHECK(cfg.noise.steps == 4);
  CHECK(cfg.run.levels == std::vector<double>{4, 16});
  CHECK(cfg.run.mode == ScenarioMode::Tree);
  CHECK_FALSE(cfg.lipschitz.has_value());
}

TEST_CASE("parse_config rejects malformed input") {
  CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "\n[extra]\nx = 1\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config(replace(kMinimal, "steps = 4", "steps = 4\nstepz = 4")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(replace(kMinimal, "\"linear\"", "\"cubic\"")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(replace(kMinimal, "[0.5, 0.0, 0.0]", "[0.5]")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(replace(kMinimal, "steps = 4", "steps = -4")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(replace(kMinimal, "m = 1", "m = \"one\"")), InvalidArgument);
  CHECK_THROWS_AS(parse_config("this is not toml ["), InvalidArgument);
  CHECK_THROWS_AS(load_config("/nonexistent/rbsde.toml"), InvalidArgument);
}

TEST_CASE("echo_config round-trips") {
  auto cfg = parse_config(kMinimal);
  cfg.run.seed = 77;
  const std::string echo = echo_config(cfg);
  CHECK(echo_config(parse_config(echo)) == echo);
}

TEST_CASE("driver_lipschitz") {
  DriverSpec s{"linear", 0.5, 0.3, -0.2};
  CHECK(driver_lipschitz(s, 4, 9) == doctest::Approx(0.6).epsilon(1e-15));  // |c| sqrt K
  CHECK(driver_lipschitz(DriverSpec{}, 1, 0) == 0.0);
}

TEST_CASE("preset builders") {
  auto cfg = parse_config(kMinimal);
  const auto p = make_problem(cfg);
  CHECK(p.m == 1);
  CHECK(p.lipschitz == 0.5);
  const auto dom = make_domain(cfg);
  CHECK(dom.is_static());
  const auto scen = make_scenarios(cfg);
  CHECK(scen.mode() == ScenarioMode::Tree);
  CHECK(scen.nodes(4) == 16);
  // clipped-brownian terminal lands in D_T.
  for (std::size_t i = 0; i < scen.nodes(4); ++i)
    CHECK(dom.at(1.0).contains(p.terminal(NoiseHistory(scen, 4, i))));
}

TEST_CASE("run_experiment: zero problem") {
  const auto cfg = parse_config(R"(
name = "zero"
[problem]
m = 1
terminal = "custom-affine"
[domain]
shape = "ball"
center = [0.0]
radius = 1.0
[noise]
d = 1
steps = 4
)");
  const auto out = scratch("zero");
  const auto res = run_experiment(cfg, out);
  CHECK(res.exit_code == 0);
  for (const auto& c : res.checks) CHECK_MESSAGE(c.passed, c.tag << ": " << c.detail);
  for (const char* f : {"config_echo.toml", "solution_reflected.csv", "solution_n4.csv", "convergence.csv",
                        "report.txt"})
    CHECK(fs::exists(out / f));
  // Every numeric field of the solution summary is zero.
  std::istringstream csv(slurp(out / "solution_n4.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // time
    while (std::getline(row, cell, ',')) CHECK(std::stod(cell) == 0.0);
  }
}

TEST_CASE("run_experiment: validation failures name the assumption") {
  SUBCASE("H4") {
    auto cfg = parse_config(kMinimal);
    cfg.domain.interior = "point";
    cfg.domain.interior_point = Vec::Constant(1, 0.5);
    const auto res = run_experiment(cfg, scratch("h4"));
    CHECK(res.exit_code == 1);
    CHECK(res.message.find("[H4]") != std::string::npos);
  }
  SUBCASE("H1") {
    auto cfg = parse_config(kMinimal);
    cfg.terminal.kind = "brownian";
    const auto res = run_experiment(cfg, scratch("h1"));
    CHECK(res.exit_code == 1);
    CHECK(res.message.find("[H1]") != std::string::npos);
  }
  SUBCASE("stability guard") {
    auto cfg = parse_config(kMinimal);
    cfg.driver.a = 2.0;  // C h = 0.5
    const auto res = run_experiment(cfg, scratch("guard"));
    CHECK(res.exit_code == 1);
    CHECK(res.message.find("[stability-guard]") != std::string::npos);
  }
  SUBCASE("H3") {
    auto cfg = parse_config(kMinimal);
    cfg.lipschitz = 0.1;  // below |a|
    const auto res = run_experiment(cfg, scratch("h3"));
    CHECK(res.exit_code == 1);
    CHECK(res.message.find("[H3]") != std::string::npos);
  }
  SUBCASE("levels") {
    auto cfg = parse_config(kMinimal);
    cfg.run.levels = {16, 4};
    CHECK(run_experiment(cfg, scratch("levels")).exit_code == 1);
  }
}

TEST_CASE("run_experiment: report lines carry their tags") {
  auto cfg = parse_config(kMinimal);
  cfg.driver.a = 1.0;
  const auto out = scratch("report");
  const auto res = run_experiment(cfg, out);
  const std::string rep = slurp(out / "report.txt");
  for (const char* tag : {"[H1]", "[H2]", "[H3]", "[H4]", "[stability-guard]", "[terminal]", "[confinement]",
                          "[flat-off]", "[skorokhod-minimality]", "[penalization-convergence]", "[apriori-bound]",
                          "[ito-tanaka]"})
    CHECK_MESSAGE(rep.find(tag) != std::string::npos, tag);
  CHECK(res.checks.size() >= 12);
}
