#include "rbsde/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace rbsde {

namespace {

[[noreturn]] void fail(const std::string& what) { throw InvalidArgument("config: " + what); }

void only_keys(const toml::table& t, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : t) {
    (void)v;
    if (!allowed.count(std::string(k.str()))) fail("unknown key '" + std::string(k.str()) + "' in " + where);
  }
}

double as_number(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  fail("'" + key + "' must be a number");
}

std::optional<double> number(const toml::table& t, const std::string& key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  return as_number(*n, key);
}

std::optional<std::string> string(const toml::table& t, const std::string& key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value<std::string>()) return *v;
  fail("'" + key + "' must be a string");
}

std::vector<double> numbers(const toml::node& n, const std::string& key) {
  const toml::array* a = n.as_array();
  if (!a) fail("'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *a) out.push_back(as_number(e, key));
  return out;
}

Vec vec_of(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::optional<Vec> vector(const toml::table& t, const std::string& key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  return vec_of(numbers(*n, key));
}

std::optional<Mat> matrix(const toml::table& t, const std::string& key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  const toml::array* rows = n->as_array();
  if (!rows) fail("'" + key + "' must be an array of rows");
  std::vector<std::vector<double>> r;
  for (const auto& row : *rows) r.push_back(numbers(row, key));
  const std::size_t cols = r.empty() ? 0 : r[0].size();
  Mat out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i].size() != cols) fail("'" + key + "' rows differ in length");
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = r[i][j];
  }
  return out;
}

const toml::table& section(const toml::table& root, const std::string& name) {
  static const toml::table empty;
  const toml::node* n = root.get(name);
  if (!n) return empty;
  if (!n->is_table()) fail("'" + name + "' must be a section");
  return *n->as_table();
}

int integer(double x, const std::string& key) {
  if (x != std::floor(x) || x < 0 || x > 1e9) fail("'" + key + "' must be a non-negative integer");
  return static_cast<int>(x);
}

toml::array to_array(const Vec& v) {
  toml::array a;
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

toml::array to_array(const Mat& m) {
  toml::array a;
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_array(Vec(m.row(i).transpose())));
  return a;
}

toml::array to_array(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " at line " << e.source().begin.line;
    fail(os.str());
  }
  only_keys(root, "config", {"name", "problem", "domain", "noise", "run"});
  ExperimentConfig cfg;
  if (auto s = string(root, "name")) cfg.name = *s;

  const auto& pr = section(root, "problem");
  only_keys(pr, "[problem]", {"m", "driver", "driver_params", "lipschitz", "terminal", "terminal_scale",
                              "terminal_clip", "terminal_offset", "terminal_w", "terminal_j"});
  if (auto x = number(pr, "m")) cfg.m = integer(*x, "m");
  if (cfg.m < 1) fail("'m' must be >= 1");
  if (auto s = string(pr, "driver")) cfg.driver.kind = *s;
  if (cfg.driver.kind != "zero" && cfg.driver.kind != "linear" && cfg.driver.kind != "lipschitz-saturating")
    fail("unknown driver '" + cfg.driver.kind + "'");
  if (const toml::node* n = pr.get("driver_params")) {
    const auto p = numbers(*n, "driver_params");
    if (p.size() != 3) fail("'driver_params' must be [a, b, c]");
    cfg.driver.a = p[0];
    cfg.driver.b = p[1];
    cfg.driver.c = p[2];
  }
  cfg.lipschitz = number(pr, "lipschitz");
  if (auto s = string(pr, "terminal")) cfg.terminal.kind = *s;
  const std::set<std::string> terminals{"brownian", "clipped-brownian", "jump-compensated", "custom-affine"};
  if (!terminals.count(cfg.terminal.kind)) fail("unknown terminal '" + cfg.terminal.kind + "'");
  if (auto x = number(pr, "terminal_scale")) cfg.terminal.scale = *x;
  if (const toml::node* n = pr.get("terminal_clip")) {
    auto b = n->value<bool>();
    if (!b) fail("'terminal_clip' must be true or false");
    cfg.terminal.clip = *b;
  }
  if (auto v = vector(pr, "terminal_offset")) cfg.terminal.offset = *v;
  if (auto m = matrix(pr, "terminal_w")) cfg.terminal.w_coef = *m;
  if (auto m = matrix(pr, "terminal_j")) cfg.terminal.j_coef = *m;

  const auto& dm = section(root, "domain");
  only_keys(dm, "[domain]", {"shape", "motion", "center", "radius", "lower", "upper", "normals", "offsets",
                             "velocity", "radius_rate", "gain", "interior"});
  DomainSpec& d = cfg.domain;
  if (auto s = string(dm, "shape")) d.shape = *s;
  if (auto s = string(dm, "motion")) d.motion = *s;
  if (auto v = vector(dm, "center")) d.center = *v;
  if (auto x = number(dm, "radius")) d.radius = *x;
  if (auto v = vector(dm, "lower")) d.lower = *v;
  if (auto v = vector(dm, "upper")) d.upper = *v;
  if (auto m = matrix(dm, "normals")) d.normals = *m;
  if (auto v = vector(dm, "offsets")) d.offsets = *v;
  if (auto v = vector(dm, "velocity")) d.velocity = *v;
  if (auto x = number(dm, "radius_rate")) d.radius_rate = *x;
  if (auto x = number(dm, "gain")) d.gain = *x;
  if (const toml::node* n = dm.get("interior")) {
    if (auto s = n->value<std::string>()) {
      if (*s != "center") fail("'interior' must be \"center\" or a point");
      d.interior = "center";
    } else {
      d.interior = "point";
      d.interior_point = vec_of(numbers(*n, "interior"));
    }
  }

  const auto& nz = section(root, "noise");
  only_keys(nz, "[noise]", {"d", "steps", "horizon", "marks", "intensities"});
  if (auto x = number(nz, "d")) cfg.noise.brownian_dim = integer(*x, "d");
  if (auto x = number(nz, "steps")) cfg.noise.steps = integer(*x, "steps");
  if (auto x = number(nz, "horizon")) cfg.noise.horizon = *x;
  std::optional<Mat> marks = matrix(nz, "marks");
  std::vector<double> intens;
  if (const toml::node* n = nz.get("intensities")) intens = numbers(*n, "intensities");
  const std::size_t k = marks ? static_cast<std::size_t>(marks->rows()) : 0;
  if (k != intens.size()) fail("'marks' and 'intensities' differ in length");
  for (std::size_t i = 0; i < k; ++i)
    cfg.noise.marks.push_back({Vec(marks->row(static_cast<Eigen::Index>(i)).transpose()), intens[i]});

  const auto& rn = section(root, "run");
  only_keys(rn, "[run]", {"mode", "paths", "seed", "levels", "ito_q"});
  if (auto s = string(rn, "mode")) {
    if (*s == "tree")
      cfg.run.mode = ScenarioMode::Tree;
    else if (*s == "mc")
      cfg.run.mode = ScenarioMode::MonteCarlo;
    else
      fail("'mode' must be \"tree\" or \"mc\"");
  }
  if (auto x = number(rn, "paths")) cfg.run.paths = static_cast<std::size_t>(integer(*x, "paths"));
  if (const toml::node* n = rn.get("seed")) {
    auto v = n->value<std::int64_t>();
    if (!v || *v < 0) fail("'seed' must be a non-negative integer");
    cfg.run.seed = static_cast<std::uint64_t>(*v);
  }
  if (const toml::node* n = rn.get("levels")) cfg.run.levels = numbers(*n, "levels");
  if (const toml::node* n = rn.get("ito_q")) cfg.run.ito_q = numbers(*n, "ito_q");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string echo_config(const ExperimentConfig& cfg) {
  toml::table root;
  root.insert("name", cfg.name);

  toml::table pr;
  pr.insert("m", cfg.m);
  pr.insert("driver", cfg.driver.kind);
  pr.insert("driver_params", toml::array{cfg.driver.a, cfg.driver.b, cfg.driver.c});
  if (cfg.lipschitz) pr.insert("lipschitz", *cfg.lipschitz);
  pr.insert("terminal", cfg.terminal.kind);
  pr.insert("terminal_scale", cfg.terminal.scale);
  if (cfg.terminal.clip) pr.insert("terminal_clip", true);
  if (cfg.terminal.offset.size()) pr.insert("terminal_offset", to_array(cfg.terminal.offset));
  if (cfg.terminal.w_coef.size()) pr.insert("terminal_w", to_array(cfg.terminal.w_coef));
  if (cfg.terminal.j_coef.size()) pr.insert("terminal_j", to_array(cfg.terminal.j_coef));
  root.insert("problem", std::move(pr));

  const DomainSpec& d = cfg.domain;
  toml::table dm;
  dm.insert("shape", d.shape);
  dm.insert("motion", d.motion);
  if (d.center.size()) dm.insert("center", to_array(d.center));
  dm.insert("radius", d.radius);
  if (d.lower.size()) dm.insert("lower", to_array(d.lower));
  if (d.upper.size()) dm.insert("upper", to_array(d.upper));
  if (d.normals.size()) dm.insert("normals", to_array(d.normals));
  if (d.offsets.size()) dm.insert("offsets", to_array(d.offsets));
  if (d.velocity.size()) dm.insert("velocity", to_array(d.velocity));
  dm.insert("radius_rate", d.radius_rate);
  dm.insert("gain", d.gain);
  if (d.interior == "point")
    dm.insert("interior", to_array(d.interior_point));
  else
    dm.insert("interior", "center");
  root.insert("domain", std::move(dm));

  toml::table nz;
  nz.insert("d", cfg.noise.brownian_dim);
  nz.insert("steps", cfg.noise.steps);
  nz.insert("horizon", cfg.noise.horizon);
  if (!cfg.noise.marks.empty()) {
    toml::array marks, intens;
    for (const auto& mk : cfg.noise.marks) {
      marks.push_back(to_array(mk.value));
      intens.push_back(mk.intensity);
    }
    nz.insert("marks", std::move(marks));
    nz.insert("intensities", std::move(intens));
  }
  root.insert("noise", std::move(nz));

  toml::table rn;
  rn.insert("mode", cfg.run.mode == ScenarioMode::Tree ? "tree" : "mc");
  rn.insert("paths", static_cast<std::int64_t>(cfg.run.paths));
  rn.insert("seed", static_cast<std::int64_t>(cfg.run.seed));
  rn.insert("levels", to_array(cfg.run.levels));
  rn.insert("ito_q", to_array(cfg.run.ito_q));
  root.insert("run", std::move(rn));

  std::ostringstream os;
  os << root << '\n';
  return os.str();
}

}  // namespace rbsde
