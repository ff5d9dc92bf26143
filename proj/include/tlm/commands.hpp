#pragma once

// Command dispatch behind the command-line tool.

#include "tlm/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tlm {

struct RunOptions {
  std::string out_dir;  // empty: use the config's output dir
  int threads = 1;
  std::uint64_t seed = 0;
};

const std::vector<std::string>& command_names();

/// One-line JSON error record: {"error", "message", "exit_code"[, "issues"]}.
std::string error_record(const Error& e);

/// Runs the command, writes its CSV artifacts and a short report to out.
/// Returns the process exit status; failures print an error record to err.
int dispatch(const std::string& command, const SimulationConfig& config, const RunOptions& options,
             std::ostream& out, std::ostream& err);

/// Loads the config file and dispatches; config errors are reported like
/// command errors.
int run_command(const std::string& command, const std::string& config_path,
                const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace tlm
