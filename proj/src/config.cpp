#include "aplm/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "aplm/error.hpp"

namespace aplm {

using nlohmann::ordered_json;

std::string to_string(WeightMode mode) { return mode == WeightMode::uniform ? "uniform" : "by_size"; }

namespace {

void check_object(const ordered_json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  check_object(j, where);
  std::vector<std::string> unknown;
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) unknown.push_back(key);
  }
  if (unknown.empty()) return;
  std::string msg = "unknown key(s) in " + where + ":";
  for (const auto& k : unknown) msg += " '" + k + "'";
  throw ConfigError(msg);
}

template <class T>
T get(const ordered_json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <class T>
void maybe(const ordered_json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

WeightMode parse_weights(const std::string& s) {
  if (s == "uniform") return WeightMode::uniform;
  if (s == "by_size") return WeightMode::by_size;
  throw ConfigError("weights must be 'uniform' or 'by_size', got '" + s + "'");
}

void parse_dgp(const ordered_json& j, DgpConfig& c, const std::string& where) {
  check_keys(j, {"N", "s", "beta_scheme", "beta_value", "delta", "g1_shift", "sigma", "interior_knots", "degree"},
             where);
  maybe(j, "N", c.N, where);
  maybe(j, "s", c.s, where);
  if (j.contains("beta_scheme")) c.beta_scheme = parse_beta_scheme(get<std::string>(j, "beta_scheme", where));
  maybe(j, "beta_value", c.beta_value, where);
  maybe(j, "delta", c.delta, where);
  maybe(j, "g1_shift", c.g1_shift, where);
  maybe(j, "sigma", c.sigma, where);
  maybe(j, "interior_knots", c.interior_knots, where);
  maybe(j, "degree", c.degree, where);
  c.validate();
}

void parse_tests(const ordered_json& j, TestSelection& t) {
  const std::string where = "tests";
  check_keys(j, {"run", "alpha", "level", "bootstrap_replicates", "contrast", "wald_pair", "lrt_component", "nulls"},
             where);
  if (j.contains("run")) {
    t.psi1 = t.psi2 = t.bootstrap_max = t.bootstrap_consecutive = t.lrt_component = t.lrt_joint = false;
    for (const auto& name : get<std::vector<std::string>>(j, "run", where)) {
      if (name == "psi1") t.psi1 = true;
      else if (name == "psi2") t.psi2 = true;
      else if (name == "bootstrap_max") t.bootstrap_max = true;
      else if (name == "bootstrap_consecutive") t.bootstrap_consecutive = true;
      else if (name == "lrt_component") t.lrt_component = true;
      else if (name == "lrt_joint") t.lrt_joint = true;
      else throw ConfigError("unknown test '" + name + "' in tests.run");
    }
  }
  maybe(j, "alpha", t.alpha, where);
  maybe(j, "level", t.level, where);
  maybe(j, "bootstrap_replicates", t.bootstrap_replicates, where);
  if (j.contains("contrast")) {
    const auto rows = get<std::vector<std::vector<double>>>(j, "contrast", where);
    if (rows.empty() || rows.front().empty()) throw ConfigError("tests.contrast must be a nonempty matrix");
    t.contrast.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.front().size()) throw ConfigError("tests.contrast rows differ in length");
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        t.contrast(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
    }
  }
  if (j.contains("wald_pair")) {
    const auto pair = get<std::vector<std::size_t>>(j, "wald_pair", where);
    if (pair.size() != 2 || pair[0] == pair[1]) throw ConfigError("tests.wald_pair must name two distinct groups");
    t.wald_first = pair[0];
    t.wald_second = pair[1];
  }
  maybe(j, "lrt_component", t.lrt_component_index, where);
  if (j.contains("nulls")) {
    const auto v = get<std::vector<double>>(j, "nulls", where);
    t.nulls = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (!(t.alpha > 0.0 && t.alpha < 1.0)) throw ConfigError("tests.alpha must lie in (0,1)");
  if (!(t.level > 0.0 && t.level < 1.0)) throw ConfigError("tests.level must lie in (0,1)");
  if (t.bootstrap_replicates < 1) throw ConfigError("tests.bootstrap_replicates must be >= 1");
  if (t.lrt_component_index < 0) throw ConfigError("tests.lrt_component must be >= 0");
}

void parse_simulation(const ordered_json& j, PipelineConfig& cfg) {
  const std::string where = "simulation";
  check_keys(j, {"preset", "grid", "replications", "alpha", "level", "weights", "wald", "bootstrap", "lrt",
                 "bootstrap_replicates", "lrt_component"},
             where);
  SimulationPlan plan;
  if (j.contains("preset")) {
    if (j.contains("grid")) throw ConfigError("simulation takes either 'preset' or 'grid', not both");
    const auto preset = simulation_preset(get<std::string>(j, "preset", where), cfg.seed);
    plan.preset = preset.name;
    plan.grid = preset.grid;
    plan.options = preset.options;
  } else if (j.contains("grid")) {
    const auto& grid = j.at("grid");
    if (!grid.is_array() || grid.empty()) throw ConfigError("simulation.grid must be a nonempty array");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      DgpConfig c;
      c.seed = cfg.seed;
      c.degree = cfg.degree;
      c.interior_knots = cfg.interior_knots;
      parse_dgp(grid[i], c, "simulation.grid[" + std::to_string(i) + "]");
      plan.grid.push_back(c);
    }
  } else {
    throw ConfigError("simulation needs 'preset' or 'grid'");
  }
  auto& o = plan.options;
  maybe(j, "replications", o.replications, where);
  maybe(j, "alpha", o.alpha, where);
  maybe(j, "level", o.level, where);
  if (j.contains("weights")) o.weights = parse_weights(get<std::string>(j, "weights", where));
  maybe(j, "wald", o.wald, where);
  maybe(j, "bootstrap", o.bootstrap, where);
  maybe(j, "lrt", o.lrt, where);
  maybe(j, "bootstrap_replicates", o.bootstrap_replicates, where);
  maybe(j, "lrt_component", o.lrt_component, where);
  if (o.replications < 1) throw ConfigError("simulation.replications must be >= 1");
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw ConfigError("simulation.alpha must lie in (0,1)");
  if (!(o.level > 0.0 && o.level < 1.0)) throw ConfigError("simulation.level must lie in (0,1)");
  if (o.bootstrap_replicates < 1) throw ConfigError("simulation.bootstrap_replicates must be >= 1");
  if (o.lrt_component < 0 || o.lrt_component > 1) throw ConfigError("simulation.lrt_component must be 0 or 1");
  cfg.simulation = std::move(plan);
}

void validate_roles(const PipelineConfig& cfg) {
  const auto& r = cfg.roles;
  if (r.response.empty()) throw ConfigError("columns.response is required");
  if (r.group.empty()) throw ConfigError("columns.group is required");
  if (r.spline.empty()) throw ConfigError("columns.spline needs at least one column");
  if (r.linear.empty()) throw ConfigError("columns.linear needs at least one column");
  std::set<std::string> seen;
  auto claim = [&](const std::string& name, const char* role) {
    if (name.empty()) throw ConfigError(std::string("empty column name in role ") + role);
    if (!seen.insert(name).second) throw ConfigError("column '" + name + "' is assigned to more than one role");
  };
  claim(r.response, "response");
  claim(r.group, "group");
  for (const auto& c : r.linear) claim(c, "linear");
  for (const auto& c : r.spline) claim(c, "spline");
  for (const auto& [name, t] : cfg.transforms) {
    if (!seen.contains(name) || name == r.group) {
      throw ConfigError("transform declared for column '" + name + "' which has no numeric role");
    }
  }
}

}  // namespace

PipelineConfig parse_config(const ordered_json& doc) {
  check_keys(doc, {"input", "dgp", "simulation", "columns", "transforms", "spline", "weights", "homogeneous", "tests",
                   "output", "seed", "threads"},
             "config");
  PipelineConfig cfg;
  cfg.echo = doc;
  const std::string top = "config";
  maybe(doc, "seed", cfg.seed, top);
  maybe(doc, "threads", cfg.threads, top);
  if (cfg.threads < 0) throw ConfigError("threads must be >= 0 (0 = all cores)");
  if (doc.contains("output")) cfg.output = get<std::string>(doc, "output", top);
  if (doc.contains("weights")) cfg.weights = parse_weights(get<std::string>(doc, "weights", top));
  maybe(doc, "homogeneous", cfg.homogeneous, top);

  if (doc.contains("spline")) {
    const auto& s = doc.at("spline");
    check_keys(s, {"degree", "interior_knots", "scale_columns"}, "spline");
    maybe(s, "degree", cfg.degree, "spline");
    maybe(s, "interior_knots", cfg.interior_knots, "spline");
    maybe(s, "scale_columns", cfg.scale_columns, "spline");
  }
  if (cfg.degree < 1) throw ConfigError("spline.degree must be >= 1");
  if (cfg.interior_knots < 0) throw ConfigError("spline.interior_knots must be >= 0");

  if (doc.contains("columns")) {
    const auto& c = doc.at("columns");
    check_keys(c, {"response", "linear", "spline", "group"}, "columns");
    maybe(c, "response", cfg.roles.response, "columns");
    maybe(c, "linear", cfg.roles.linear, "columns");
    maybe(c, "spline", cfg.roles.spline, "columns");
    maybe(c, "group", cfg.roles.group, "columns");
  }
  if (doc.contains("transforms")) {
    const auto& t = doc.at("transforms");
    check_object(t, "transforms");
    for (const auto& [name, list] : t.items()) {
      ColumnTransform ct;
      if (!list.is_array()) throw ConfigError("transforms." + name + " must be an array of names");
      for (const auto& item : list) {
        if (!item.is_string()) throw ConfigError("transforms." + name + " must contain strings");
        const auto op = item.get<std::string>();
        if (op == "log10") ct.log10 = true;
        else if (op == "minmax") ct.minmax = true;
        else throw ConfigError("unknown transform '" + op + "' for column '" + name + "'");
      }
      cfg.transforms[name] = ct;
    }
  }
  if (doc.contains("tests")) parse_tests(doc.at("tests"), cfg.tests);

  if (doc.contains("input")) cfg.input = get<std::string>(doc, "input", top);
  if (doc.contains("dgp")) {
    if (cfg.input) throw ConfigError("config takes either 'input' or 'dgp', not both");
    if (doc.contains("columns") || doc.contains("transforms")) {
      throw ConfigError("'columns' and 'transforms' apply to CSV input, not to 'dgp'");
    }
    DgpConfig c;
    c.seed = cfg.seed;
    c.degree = cfg.degree;
    c.interior_knots = cfg.interior_knots;
    parse_dgp(doc.at("dgp"), c, "dgp");
    cfg.simulated_data = c;
    cfg.roles = {"y", {"x"}, {"z1", "z2"}, "group"};
  }
  if (doc.contains("simulation")) parse_simulation(doc.at("simulation"), cfg);
  if (cfg.input) validate_roles(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto cfg = parse_config(doc);
  // Relative input paths are read against the config file's directory.
  if (cfg.input && cfg.input->is_relative()) cfg.input = path.parent_path() / *cfg.input;
  return cfg;
}

void validate_for_fit(const PipelineConfig& config) {
  if (!config.input && !config.simulated_data) throw ConfigError("fit needs 'input' (CSV) or 'dgp' (simulated data)");
}

void validate_for_simulate(const PipelineConfig& config) {
  if (!config.simulation) throw ConfigError("simulate needs a 'simulation' section");
}

}  // namespace aplm
