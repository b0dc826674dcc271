#include "survacc/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <unistd.h>

#include "survacc/format.hpp"
#include "survacc/quadrature.hpp"
#include "survacc/trajectory.hpp"

namespace survacc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json num(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

json header(const std::string& command, const RunConfig& config) {
  return {{"schema_version", kSchemaVersion}, {"command", command}, {"parameters", to_json(config)}};
}

fs::path output_path(const RunConfig& config, const std::string& name) {
  fs::create_directories(config.out_dir);
  return fs::path(config.out_dir) / name;
}

void write_text(const RunConfig& config, const std::string& name, const std::string& text) {
  std::ofstream out(output_path(config, name), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + name);
  out << text;
}

std::string series_name(const std::string& stem, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_t%03zu.csv", index);
  return stem + buf;
}

double edge_to_peak(const Eigen::ArrayXd& density) {
  const double peak = density.maxCoeff();
  return peak > 0 ? std::max(density[0], density[density.size() - 1]) / peak : 0.0;
}

MomentumGrid grid_for(const RunConfig& config) {
  const GridSettings g = config.grid();
  return build_grid(config.state(), config.atom(), config.constants(), config.max_time(),
                    g.coverage_sigmas, g.n, config.model, config.rate_policy);
}

std::string snapshot_csv(const EvolutionSnapshot& snapshot) {
  std::ostringstream out;
  write_snapshot_csv(out, snapshot);
  return out.str();
}

// Relative deviation against `reference`, or against `fallback` when the
// reference is zero (p0 = 0 runs).
double relative(double value, double reference, double fallback) {
  const double denom = reference != 0 ? std::abs(reference) : fallback;
  return std::abs(value - reference) / denom;
}

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json provenance(const RunOptions& options) {
  char host[256] = {};
  gethostname(host, sizeof(host) - 1);
  return {{"timestamp", iso_timestamp()}, {"host", host}, {"threads", options.threads}};
}

}  // namespace

json deterministic_scope(const json& report) {
  json out = report;
  out.erase("provenance");
  return out;
}

CommandResult cmd_estimate(const RunConfig& config, const RunOptions& options) {
  validate(config);
  const auto state = config.state();
  const auto atom = config.atom();
  const auto consts = config.constants();

  const double force = constant_survival_force(state, atom, consts);
  const double accel = survival_acceleration(state, atom, consts);
  const double threshold = validity_threshold(state, atom, consts);

  json per_time = json::array();
  for (double t : config.times) {
    const auto r = analytic_report(state, atom, consts, t);
    per_time.push_back({{"t", t},
                        {"mean_p", r.mu_t},
                        {"sigma_t_sq", r.sigma_t_sq},
                        {"force", r.force},
                        {"survival_prob", r.survival_prob}});
  }

  json results = {{"force_constant", force},
                  {"acceleration", accel},
                  {"threshold_time", num(threshold)},
                  {"tau0", num(atom.tau0())},
                  {"threshold_over_tau0", num(threshold / atom.tau0())},
                  {"per_time", per_time}};
  if (config.units == UnitSystem::SI) {
    results["units"] = {{"force", "N"}, {"acceleration", "m/s^2"}, {"time", "s"}};
  } else {
    results["units"] = "natural (c = hbar = 1)";
  }

  CommandResult out;
  out.report = header("estimate", config);
  out.report["results"] = results;
  out.csv = "quantity,value\nforce_constant," + format_double(force) + "\nacceleration," +
            format_double(accel) + "\nthreshold_time," + format_double(threshold) + "\n";
  if (options.write_files) write_text(config, "estimate.json", out.report.dump(2) + "\n");
  return out;
}

CommandResult cmd_figure1(const RunConfig& config, const RunOptions& options) {
  validate(config);
  if (config.units != UnitSystem::Natural) {
    throw ConfigError("figure1: requires natural units (use --preset figure1)");
  }
  const auto state = config.state();
  const auto atom = config.atom();
  const auto consts = config.constants();
  const MomentumGrid grid = grid_for(config);
  const ComplexAmplitudeField psi0 = initial_wavefunction(state, grid);
  const Eigen::ArrayXd p = grid.points();

  json curves = json::array();
  for (std::size_t k = 0; k < config.times.size(); ++k) {
    const double t = config.times[k];
    const EvolutionSnapshot snap = evolve(psi0, atom, consts, t, config.model, config.rate_policy);
    const Eigen::ArrayXd numeric = snap.psi.abs2();
    const Eigen::ArrayXd analytic = unnormalized_density(state, atom, consts, p, t);
    const double max_rel = ((numeric - analytic).abs() / analytic).maxCoeff();
    const GaussianFit fit = fit_log_quadratic(grid, numeric);

    const std::string file = series_name("figure1", k);
    if (options.write_files) write_text(config, file, snapshot_csv(snap));
    curves.push_back({{"t", t},
                      {"file", file},
                      {"peak_p", fit.peak_p},
                      {"fitted_mean", fit.mean},
                      {"fitted_variance", fit.variance},
                      {"analytic_mean", mean_momentum(state, atom, consts, t)},
                      {"analytic_variance", effective_variance(state, atom, consts, t)},
                      {"max_rel_dev_vs_analytic_density", max_rel},
                      {"edge_to_peak", edge_to_peak(numeric)}});
  }

  CommandResult out;
  out.report = header("figure1", config);
  out.report["grid"] = {{"p_min", grid.p_min()}, {"p_max", grid.p_max()}, {"n", grid.size()},
                        {"spacing", grid.spacing()}};
  out.report["curves"] = curves;
  if (options.write_files) write_text(config, "figure1.json", out.report.dump(2) + "\n");
  return out;
}

CommandResult cmd_evolve(const RunConfig& config, const RunOptions& options) {
  validate(config);
  const auto state = config.state();
  const auto atom = config.atom();
  const auto consts = config.constants();
  const MomentumGrid grid = grid_for(config);
  const ComplexAmplitudeField psi0 = initial_wavefunction(state, grid);

  json snapshots = json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < config.times.size(); ++k) {
    const double t = config.times[k];
    const EvolutionSnapshot snap = evolve(psi0, atom, consts, t, config.model, config.rate_policy);
    const double residual = branch_norm_residual(psi0, snap);
    worst = std::max(worst, residual);

    const std::string file = series_name("evolve", k);
    if (options.write_files) write_text(config, file, snapshot_csv(snap));
    snapshots.push_back({{"t", t},
                         {"file", file},
                         {"norm_sq_psi", snap.norm_sq_psi},
                         {"norm_sq_chi", snap.norm_sq_chi},
                         {"norm_sum", snap.norm_sq_psi + snap.norm_sq_chi},
                         {"mean_p", num(snap.mean_p)},
                         {"branch_norm_residual", residual},
                         {"edge_to_peak", edge_to_peak(snap.psi.abs2())}});
  }

  CommandResult out;
  out.report = header("evolve", config);
  out.report["grid"] = {{"p_min", grid.p_min()}, {"p_max", grid.p_max()}, {"n", grid.size()}};
  out.report["snapshots"] = snapshots;
  out.report["max_branch_norm_residual"] = worst;
  if (options.write_files) write_text(config, "evolve.json", out.report.dump(2) + "\n");
  return out;
}

CommandResult cmd_compare(const RunConfig& config, const RunOptions& options) {
  validate(config);
  const auto state = config.state();
  const auto atom = config.atom();
  const auto consts = config.constants();
  const Gates& gates = config.gates;
  const bool gated = config.model == DispersionModel::FirstOrder;

  const MomentumGrid grid = grid_for(config);
  const ComplexAmplitudeField psi0 = initial_wavefunction(state, grid);
  const Eigen::ArrayXd p = grid.points();

  const SeedSpec seeds{config.seed};
  const auto momenta = sample_momenta(state, config.trajectories, seeds, options.threads);
  const double horizon = config.max_time();
  std::vector<TrajectoryRecord> records;
  if (horizon > 0) {
    records = simulate_fates(momenta, atom, consts, horizon, config.model, seeds,
                             config.rate_policy, options.threads);
  } else {
    for (double q : momenta) records.push_back({q, std::nullopt});
  }
  const double n = static_cast<double>(config.trajectories);

  json rows = json::array();
  bool all_pass = true;
  std::ostringstream csv;
  csv << "t,analytic_mean_p,numeric_mean_p,mc_mean_p,mc_se,numeric_rel_dev,mc_dev_in_se,"
         "p_closed_form,p_quadrature,p_numeric,p_mc,quadrature_rel_dev,mc_dev_in_binomial_sd,pass\n";

  for (double t : config.times) {
    const double mean_a = mean_momentum(state, atom, consts, t);
    const double prob_a = ensemble_survival_probability(state, atom, consts, t);
    const double prob_q = simpson(unnormalized_density(state, atom, consts, p, t), grid.spacing());

    const EvolutionSnapshot snap = evolve(psi0, atom, consts, t, config.model, config.rate_policy);
    const double mean_n = conditional_mean_momentum(snap);

    const EnsembleStats mc = conditional_stats(records, atom, consts, t, config.model, config.rate_policy);

    const double numeric_rel = relative(mean_n, mean_a, state.sigma());
    const double mc_dev = std::abs(mc.conditional_mean_p - mean_a);
    const std::optional<double> mc_dev_se =
        mc.conditional_se && *mc.conditional_se > 0 ? std::optional(mc_dev / *mc.conditional_se)
                                                    : (mc_dev == 0 ? std::optional(0.0) : std::nullopt);
    const double quad_rel = std::abs(prob_q - prob_a) / prob_a;
    const double binom_sd = std::sqrt(prob_a * (1 - prob_a) / n);
    const double p_mc_dev = std::abs(mc.survival_estimate - prob_a);
    const double p_mc_dev_q = std::abs(mc.survival_estimate - prob_q);
    const std::optional<double> p_mc_dev_sd =
        binom_sd > 0 ? std::optional(p_mc_dev / binom_sd) : (p_mc_dev == 0 ? std::optional(0.0) : std::nullopt);
    // Against the quadrature the band also absorbs the quadrature's own offset.
    const bool mc_vs_quadrature = p_mc_dev_q <= gates.mc_sigmas * binom_sd + std::abs(prob_q - prob_a);

    const json checks = {
        {"numeric_mean", numeric_rel < gates.numeric_mean_rel},
        {"mc_mean", mc_dev_se.has_value() && *mc_dev_se <= gates.mc_sigmas},
        {"survival_quadrature", quad_rel < gates.survival_quadrature_rel},
        {"survival_mc", p_mc_dev_sd.has_value() && *p_mc_dev_sd <= gates.mc_sigmas},
        {"survival_mc_vs_quadrature", mc_vs_quadrature},
    };
    bool pass = true;
    for (const auto& [name, ok] : checks.items()) pass = pass && ok.get<bool>();
    if (gated) all_pass = all_pass && pass;

    rows.push_back({{"t", t},
                    {"analytic_mean_p", mean_a},
                    {"numeric_mean_p", mean_n},
                    {"mc_mean_p", mc.conditional_mean_p},
                    {"mc_se", num(mc.conditional_se)},
                    {"mc_growth_trajectories", mc.n_growth},
                    {"numeric_rel_dev", numeric_rel},
                    {"mc_dev_in_se", num(mc_dev_se)},
                    {"p_closed_form", prob_a},
                    {"p_quadrature", prob_q},
                    {"p_numeric", snap.norm_sq_psi},
                    {"p_mc", mc.survival_estimate},
                    {"quadrature_rel_dev", quad_rel},
                    {"mc_dev_in_binomial_sd", num(p_mc_dev_sd)},
                    {"checks", checks},
                    {"pass", pass}});
    csv << format_double(t) << ',' << format_double(mean_a) << ',' << format_double(mean_n) << ','
        << format_double(mc.conditional_mean_p) << ','
        << format_double(mc.conditional_se.value_or(NAN)) << ',' << format_double(numeric_rel) << ','
        << format_double(mc_dev_se.value_or(NAN)) << ',' << format_double(prob_a) << ','
        << format_double(prob_q) << ',' << format_double(snap.norm_sq_psi) << ','
        << format_double(mc.survival_estimate) << ',' << format_double(quad_rel) << ','
        << format_double(p_mc_dev_sd.value_or(NAN)) << ',' << (pass ? "true" : "false") << '\n';
  }

  CommandResult out;
  out.report = header("compare", config);
  out.report["denominators"] = {
      {"numeric_rel_dev", "|analytic_mean_p| (sigma when p0 = 0)"},
      {"mc_dev_in_se", "survivor-mean standard error"},
      {"quadrature_rel_dev", "p_closed_form"},
      {"mc_dev_in_binomial_sd", "sqrt(P (1 - P) / n) with P = p_closed_form"}};
  out.report["gated"] = gated;
  out.report["rows"] = rows;
  out.report["pass"] = all_pass;
  out.report["provenance"] = provenance(options);
  out.csv = csv.str();
  out.exit_code = all_pass ? kExitOk : kExitGateFailure;
  if (options.write_files) {
    write_text(config, "compare.json", out.report.dump(2) + "\n");
    write_text(config, "compare.csv", out.csv);
  }
  return out;
}

CommandResult cmd_ensemble(const RunConfig& config, const RunOptions& options) {
  validate(config);
  const auto state = config.state();
  const auto atom = config.atom();
  const auto consts = config.constants();
  const SeedSpec seeds{config.seed};

  const auto momenta = sample_momenta(state, config.trajectories, seeds, options.threads);
  const double horizon = config.max_time();
  std::vector<TrajectoryRecord> records;
  if (horizon > 0) {
    records = simulate_fates(momenta, atom, consts, horizon, config.model, seeds,
                             config.rate_policy, options.threads);
  } else {
    for (double q : momenta) records.push_back({q, std::nullopt});
  }

  json stats = json::array();
  for (double t : config.times) {
    json row = {{"t", t},
                {"analytic_mean_p", mean_momentum(state, atom, consts, t)},
                {"analytic_survival_prob", ensemble_survival_probability(state, atom, consts, t)}};
    try {
      const EnsembleStats s = conditional_stats(records, atom, consts, t, config.model, config.rate_policy);
      const PartitionResiduals r = conservation_check(s);
      row.update({{"n_total", s.n_total},
                  {"n_survived", s.n_survived},
                  {"survival_fraction", s.survival_fraction},
                  {"sample_mean_p", s.sample_mean_p},
                  {"mean_p_survived", s.mean_p_survived},
                  {"se_survived", num(s.se_survived)},
                  {"mean_p_decayed", num(s.mean_p_decayed)},
                  {"mean_energy_total", s.mean_energy_total},
                  {"mean_energy_survived", s.mean_energy_survived},
                  {"mean_energy_decayed", num(s.mean_energy_decayed)},
                  {"n_growth", s.n_growth},
                  {"survival_estimate", s.survival_estimate},
                  {"conditional_mean_p", s.conditional_mean_p},
                  {"conditional_se", num(s.conditional_se)},
                  {"conservation",
                   {{"momentum_residual", r.momentum},
                    {"energy_residual", r.energy},
                    {"momentum_relative", r.momentum_relative},
                    {"energy_relative", r.energy_relative}}}});
    } catch (const ValidityError&) {
      // Everybody decayed: the post-selected set is empty.
      row.update({{"n_total", records.size()}, {"n_survived", 0}, {"survival_fraction", 0.0},
                  {"mean_p_survived", nullptr}, {"se_survived", nullptr}});
    }
    stats.push_back(row);
  }

  CommandResult out;
  out.report = header("ensemble", config);
  out.report["seeds"] = {{"master_seed", seeds.master_seed},
                         {"derivation", "mix64(master, index, stream) -> mt19937_64; stream 0 momentum, 1 fate"}};
  out.report["horizon"] = horizon;
  out.report["stats"] = stats;
  out.report["provenance"] = provenance(options);
  if (options.write_files) write_text(config, "ensemble.json", out.report.dump(2) + "\n");
  return out;
}

}  // namespace survacc
