#pragma once

// Run configuration: a single JSON document, two compiled-in presets, and an
// environment override for every key.
//
// Environment mapping: SURVACC_ + dotted key upper-cased with '.' -> '_'.
//   units                -> SURVACC_UNITS              ("si" | "natural")
//   model                -> SURVACC_MODEL              ("first-order" | "exact")
//   rate_policy          -> SURVACC_RATE_POLICY        ("strict" | "continue-first-order")
//   constants.c          -> SURVACC_CONSTANTS_C
//   constants.hbar       -> SURVACC_CONSTANTS_HBAR
//   atom.mass            -> SURVACC_ATOM_MASS
//   atom.gamma0          -> SURVACC_ATOM_GAMMA0
//   state.p0             -> SURVACC_STATE_P0
//   state.sigma          -> SURVACC_STATE_SIGMA
//   times                -> SURVACC_TIMES              (comma-separated)
//   grid.n               -> SURVACC_GRID_N
//   grid.coverage        -> SURVACC_GRID_COVERAGE
//   ensemble.trajectories-> SURVACC_ENSEMBLE_TRAJECTORIES
//   ensemble.seed        -> SURVACC_ENSEMBLE_SEED
//   gates.*              -> SURVACC_GATES_*
//   output.dir           -> SURVACC_OUTPUT_DIR
//   output.format        -> SURVACC_OUTPUT_FORMAT      ("csv" | "json")

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "survacc/analytic.hpp"
#include "survacc/numeric.hpp"
#include "survacc/physics.hpp"

namespace survacc {

inline constexpr int kSchemaVersion = 1;

enum class OutputFormat { Csv, Json };

// Cross-engine acceptance gates.
struct Gates {
  double numeric_mean_rel = 1e-6;
  double mc_sigmas = 4.0;
  double survival_quadrature_rel = 1e-8;
  double branch_norm_rel = 1e-12;

  bool operator==(const Gates&) const = default;
};

struct RunConfig {
  std::string preset;
  UnitSystem units = UnitSystem::SI;
  double c = 299792458.0;
  double hbar = 1.054571817e-34;
  double mass = 1.0;
  double gamma0 = 1.0;
  double p0 = 0.0;
  double sigma = 1.0;
  DispersionModel model = DispersionModel::FirstOrder;
  RatePolicy rate_policy = RatePolicy::Strict;
  std::vector<double> times;
  std::size_t grid_n = 4097;
  double grid_coverage = 8.0;
  std::size_t trajectories = 1'000'000;
  std::uint64_t seed = 0;
  Gates gates;
  std::string out_dir = ".";
  OutputFormat format = OutputFormat::Json;

  bool operator==(const RunConfig&) const = default;

  PhysicalConstants<double> constants() const { return {c, hbar, units}; }
  AtomParams<double> atom() const { return {mass, gamma0}; }
  GaussianMomentumState<double> state() const { return {p0, sigma}; }
  GridSettings grid() const { return {static_cast<Eigen::Index>(grid_n), grid_coverage}; }
  double max_time() const;
};

/// Table I parameters for Rb-87 in SI units.
RunConfig preset_rb87_table1();
/// Figure 1 caption parameters in natural units.
RunConfig preset_figure1();
RunConfig preset(const std::string& name);

nlohmann::json to_json(const RunConfig& config);
/// Parses on top of `base`, so partial documents only override what they name.
RunConfig from_json(const nlohmann::json& doc, RunConfig base = preset_rb87_table1());

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_environment();

/// Applies SURVACC_* overrides found through `lookup`.
RunConfig apply_env_overrides(const RunConfig& config, const EnvLookup& lookup);

/// Checks every downstream precondition.  Throws ConfigError for malformed
/// values and ValidityError for times at or beyond the validity threshold.
void validate(const RunConfig& config);

DispersionModel parse_model(const std::string& text);
OutputFormat parse_format(const std::string& text);

}  // namespace survacc
