#pragma once

// Experiment drivers behind the command-line subcommands.  Each returns a JSON
// report plus the process exit code; files go to config.out_dir.

#include <string>

#include <json.hpp>

#include "survacc/config.hpp"

namespace survacc {

struct RunOptions {
  unsigned threads = 1;
  bool write_files = true;
};

struct CommandResult {
  nlohmann::json report;
  int exit_code = kExitOk;
  std::string csv;  // tabular rendering, where the command has one
};

CommandResult cmd_estimate(const RunConfig& config, const RunOptions& options = {});
CommandResult cmd_figure1(const RunConfig& config, const RunOptions& options = {});
CommandResult cmd_evolve(const RunConfig& config, const RunOptions& options = {});
CommandResult cmd_compare(const RunConfig& config, const RunOptions& options = {});
CommandResult cmd_ensemble(const RunConfig& config, const RunOptions& options = {});

/// Report without its "provenance" block (timestamp, host, thread count).
nlohmann::json deterministic_scope(const nlohmann::json& report);

}  // namespace survacc
