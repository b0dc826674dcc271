// survacc: survival-acceleration experiments from the command line.
//
//   survacc estimate  [--preset rb87-table1]
//   survacc figure1   [--preset figure1] --out figs/
//   survacc evolve | compare | ensemble  [common flags]
//
// Exit codes: 0 ok, 1 internal error, 2 config error, 3 validity violation,
// 4 gate failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "survacc/commands.hpp"

namespace {

using survacc::RunConfig;

struct Flags {
  std::string config_path;
  std::string preset;
  std::optional<std::string> out;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::optional<std::string> format;
  std::optional<std::string> times;
};

RunConfig load_config(const Flags& flags, const std::string& default_preset) {
  RunConfig config = survacc::preset(flags.preset.empty() ? default_preset : flags.preset);
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw survacc::ConfigError("cannot open config file " + flags.config_path);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw survacc::ConfigError(flags.config_path + ": " + e.what());
    }
    config = survacc::from_json(doc, config);
  }
  config = survacc::apply_env_overrides(config, survacc::process_environment());

  if (flags.out) config.out_dir = *flags.out;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.model) config.model = survacc::parse_model(*flags.model);
  if (flags.format) config.format = survacc::parse_format(*flags.format);
  if (flags.times) {
    config.times.clear();
    std::stringstream ss(*flags.times);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        config.times.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw survacc::ConfigError("--times: not a number: '" + item + "'");
      }
    }
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional no-decay evolution of a moving excited atom"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config_path, "JSON run configuration");
  app.add_option("--preset", flags.preset, "rb87-table1 | figure1");
  app.add_option("--out", flags.out, "output directory");
  app.add_option("--threads", flags.threads, "worker threads for Monte Carlo")->check(CLI::PositiveNumber);
  app.add_option("--seed", flags.seed, "master seed (u64)");
  app.add_option("--model", flags.model, "first-order | exact");
  app.add_option("--format", flags.format, "csv | json (stdout rendering)");
  app.add_option("--times", flags.times, "comma-separated evaluation times");

  struct Sub {
    const char* name;
    const char* help;
    const char* preset;
    survacc::CommandResult (*run)(const RunConfig&, const survacc::RunOptions&);
  };
  const Sub subs[] = {
      {"estimate", "force, acceleration and validity threshold", "rb87-table1", survacc::cmd_estimate},
      {"figure1", "unnormalized |psi(p,t)|^2 curves as CSV", "figure1", survacc::cmd_figure1},
      {"evolve", "psi and chi snapshots with branch-norm residuals", "rb87-table1", survacc::cmd_evolve},
      {"compare", "analytic vs grid vs Monte Carlo with gates", "figure1", survacc::cmd_compare},
      {"ensemble", "Monte Carlo ensemble statistics", "figure1", survacc::cmd_ensemble},
  };
  for (const auto& sub : subs) app.add_subcommand(sub.name, sub.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? survacc::kExitOk : survacc::kExitConfig;
  }

  try {
    for (const auto& sub : subs) {
      if (!app.got_subcommand(sub.name)) continue;
      const RunConfig config = load_config(flags, sub.preset);
      const survacc::CommandResult result = sub.run(config, {flags.threads, true});
      if (config.format == survacc::OutputFormat::Csv && !result.csv.empty()) {
        std::cout << result.csv;
      } else {
        std::cout << result.report.dump(2) << '\n';
      }
      return result.exit_code;
    }
  } catch (const survacc::ValidityError& e) {
    std::cerr << "validity error: " << e.what() << '\n';
    return survacc::kExitValidity;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return survacc::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return survacc::kExitInternal;
  }
  return survacc::kExitInternal;
}
