#include "survacc/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace survacc {

using nlohmann::json;

double RunConfig::max_time() const {
  return times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
}

RunConfig preset_rb87_table1() {
  RunConfig c;
  c.preset = "rb87-table1";
  c.units = UnitSystem::SI;
  c.c = 3.00e8;
  c.hbar = 1.054571817e-34;
  c.mass = 1.44e-25;
  c.gamma0 = 3.70e7;
  c.p0 = 1.44e-27;
  c.sigma = 1.0e-28;
  c.model = DispersionModel::FirstOrder;
  c.rate_policy = RatePolicy::Strict;
  c.times = {0.0, 1.0 / 3.70e7};
  c.trajectories = 100'000;
  c.seed = 87;
  return c;
}

RunConfig preset_figure1() {
  RunConfig c;
  c.preset = "figure1";
  c.units = UnitSystem::Natural;
  c.c = 1.0;
  c.hbar = 1.0;
  c.mass = 1.0;
  c.gamma0 = 5.0;
  c.p0 = 1.0;
  c.sigma = 0.2;
  c.model = DispersionModel::FirstOrder;
  // p0 = m c puts part of the packet past sqrt(2) m c.
  c.rate_policy = RatePolicy::ContinueFirstOrder;
  c.times = {0.0, 0.25, 0.5, 1.0};
  c.trajectories = 1'000'000;
  c.seed = 1;
  return c;
}

RunConfig preset(const std::string& name) {
  if (name == "rb87-table1") return preset_rb87_table1();
  if (name == "figure1") return preset_figure1();
  throw ConfigError("unknown preset '" + name + "' (expected rb87-table1 or figure1)");
}

DispersionModel parse_model(const std::string& text) {
  if (text == "first-order") return DispersionModel::FirstOrder;
  if (text == "exact") return DispersionModel::ExactRelativistic;
  throw ConfigError("model: expected 'first-order' or 'exact', got '" + text + "'");
}

OutputFormat parse_format(const std::string& text) {
  if (text == "csv") return OutputFormat::Csv;
  if (text == "json") return OutputFormat::Json;
  throw ConfigError("output.format: expected 'csv' or 'json', got '" + text + "'");
}

namespace {

UnitSystem parse_units(const std::string& text) {
  if (text == "si") return UnitSystem::SI;
  if (text == "natural") return UnitSystem::Natural;
  throw ConfigError("units: expected 'si' or 'natural', got '" + text + "'");
}

RatePolicy parse_policy(const std::string& text) {
  if (text == "strict") return RatePolicy::Strict;
  if (text == "continue-first-order") return RatePolicy::ContinueFirstOrder;
  throw ConfigError("rate_policy: expected 'strict' or 'continue-first-order', got '" + text + "'");
}

// Reads doc[key] into `out` when present; unknown keys are rejected by the caller.
template <typename T>
void read(const json& obj, const char* key, const std::string& path, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + key + ": " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!obj.is_object()) throw ConfigError((path.empty() ? std::string("config") : path) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown config key '" + path + key + "'");
    }
  }
}

const json& section(const json& doc, const char* key) {
  static const json empty = json::object();
  const auto it = doc.find(key);
  return it == doc.end() ? empty : *it;
}

}  // namespace

json to_json(const RunConfig& c) {
  return {
      {"schema_version", kSchemaVersion},
      {"preset", c.preset},
      {"units", to_string(c.units)},
      {"model", to_string(c.model)},
      {"rate_policy", to_string(c.rate_policy)},
      {"constants", {{"c", c.c}, {"hbar", c.hbar}}},
      {"atom", {{"mass", c.mass}, {"gamma0", c.gamma0}}},
      {"state", {{"p0", c.p0}, {"sigma", c.sigma}}},
      {"times", c.times},
      {"grid", {{"n", c.grid_n}, {"coverage", c.grid_coverage}}},
      {"ensemble", {{"trajectories", c.trajectories}, {"seed", c.seed}}},
      {"gates",
       {{"numeric_mean_rel", c.gates.numeric_mean_rel},
        {"mc_sigmas", c.gates.mc_sigmas},
        {"survival_quadrature_rel", c.gates.survival_quadrature_rel},
        {"branch_norm_rel", c.gates.branch_norm_rel}}},
      {"output", {{"dir", c.out_dir}, {"format", c.format == OutputFormat::Csv ? "csv" : "json"}}},
  };
}

RunConfig from_json(const json& doc, RunConfig c) {
  reject_unknown(doc,
                 {"schema_version", "preset", "units", "model", "rate_policy", "constants", "atom",
                  "state", "times", "grid", "ensemble", "gates", "output"},
                 "");
  if (doc.contains("schema_version")) {
    int version = 0;
    read(doc, "schema_version", "", version);
    if (version != kSchemaVersion) {
      throw ConfigError("schema_version: unsupported version " + std::to_string(version));
    }
  }
  if (doc.contains("preset")) {
    std::string name;
    read(doc, "preset", "", name);
    if (name != c.preset) c = preset(name);
  }

  std::string text;
  if (doc.contains("units")) {
    read(doc, "units", "", text);
    c.units = parse_units(text);
  }
  if (doc.contains("model")) {
    read(doc, "model", "", text);
    c.model = parse_model(text);
  }
  if (doc.contains("rate_policy")) {
    read(doc, "rate_policy", "", text);
    c.rate_policy = parse_policy(text);
  }

  const json& constants = section(doc, "constants");
  reject_unknown(constants, {"c", "hbar"}, "constants.");
  read(constants, "c", "constants.", c.c);
  read(constants, "hbar", "constants.", c.hbar);

  const json& atom = section(doc, "atom");
  reject_unknown(atom, {"mass", "gamma0"}, "atom.");
  read(atom, "mass", "atom.", c.mass);
  read(atom, "gamma0", "atom.", c.gamma0);

  const json& state = section(doc, "state");
  reject_unknown(state, {"p0", "sigma"}, "state.");
  read(state, "p0", "state.", c.p0);
  read(state, "sigma", "state.", c.sigma);

  read(doc, "times", "", c.times);

  const json& grid = section(doc, "grid");
  reject_unknown(grid, {"n", "coverage"}, "grid.");
  read(grid, "n", "grid.", c.grid_n);
  read(grid, "coverage", "grid.", c.grid_coverage);

  const json& ensemble = section(doc, "ensemble");
  reject_unknown(ensemble, {"trajectories", "seed"}, "ensemble.");
  read(ensemble, "trajectories", "ensemble.", c.trajectories);
  read(ensemble, "seed", "ensemble.", c.seed);

  const json& gates = section(doc, "gates");
  reject_unknown(gates, {"numeric_mean_rel", "mc_sigmas", "survival_quadrature_rel", "branch_norm_rel"},
                 "gates.");
  read(gates, "numeric_mean_rel", "gates.", c.gates.numeric_mean_rel);
  read(gates, "mc_sigmas", "gates.", c.gates.mc_sigmas);
  read(gates, "survival_quadrature_rel", "gates.", c.gates.survival_quadrature_rel);
  read(gates, "branch_norm_rel", "gates.", c.gates.branch_norm_rel);

  const json& output = section(doc, "output");
  reject_unknown(output, {"dir", "format"}, "output.");
  read(output, "dir", "output.", c.out_dir);
  if (output.contains("format")) {
    read(output, "format", "output.", text);
    c.format = parse_format(text);
  }
  return c;
}

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

std::string env_name(const std::string& dotted) {
  std::string out = "SURVACC_";
  for (char ch : dotted) {
    out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return out;
}

double parse_double(const std::string& text, const std::string& var) {
  double value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && std::isspace(static_cast<unsigned char>(*first))) ++first;
  while (last > first && std::isspace(static_cast<unsigned char>(last[-1]))) --last;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ConfigError(var + ": not a number: '" + text + "'");
  return value;
}

template <typename Int>
Int parse_integer(const std::string& text, const std::string& var) {
  Int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(var + ": not an integer: '" + text + "'");
  }
  return value;
}

json parse_env_value(const json& current, const std::string& text, const std::string& var) {
  if (current.is_number_unsigned()) return parse_integer<std::uint64_t>(text, var);
  if (current.is_number_integer()) return parse_integer<std::int64_t>(text, var);
  if (current.is_number()) return parse_double(text, var);
  if (current.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(var + ": expected true or false");
  }
  if (current.is_array()) {
    json arr = json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) arr.push_back(parse_double(item, var));
    return arr;
  }
  return text;
}

void override_leaves(json& node, const std::string& prefix, const EnvLookup& lookup) {
  for (auto& [key, value] : node.items()) {
    const std::string dotted = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      override_leaves(value, dotted, lookup);
      continue;
    }
    if (dotted == "schema_version" || dotted == "preset") continue;
    const std::string var = env_name(dotted);
    if (const auto text = lookup(var)) value = parse_env_value(value, *text, var);
  }
}

}  // namespace

RunConfig apply_env_overrides(const RunConfig& config, const EnvLookup& lookup) {
  json doc = to_json(config);
  override_leaves(doc, "", lookup);
  return from_json(doc, config);
}

void validate(const RunConfig& c) {
  const auto consts = c.constants();
  const auto atom = c.atom();
  const auto state = c.state();
  if (c.times.empty()) throw ConfigError("times: at least one time is required");
  for (double t : c.times) {
    if (!std::isfinite(t) || t < 0) throw ConfigError("times: every time must be finite and >= 0");
    // Throws ValidityError at or past (1 - margin) * threshold.
    (void)effective_variance(state, atom, consts, t);
  }
  if (c.grid_n < 3 || c.grid_n % 2 == 0) throw ConfigError("grid.n: must be odd and >= 3");
  if (!(c.grid_coverage >= kMinCoverageSigmas)) throw ConfigError("grid.coverage: must be >= 6");
  if (c.trajectories < 1) throw ConfigError("ensemble.trajectories: must be >= 1");
  const Gates& g = c.gates;
  if (!(g.numeric_mean_rel > 0 && g.mc_sigmas > 0 && g.survival_quadrature_rel > 0 && g.branch_norm_rel > 0)) {
    throw ConfigError("gates: every gate must be > 0");
  }
}

}  // namespace survacc
