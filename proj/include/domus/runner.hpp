#pragma once

#include <string>

namespace domus::runner {

// Exit-status contract shared with the C API and the CLI.
enum Status {
  kOk = 0,
  kUsageError = 1,  // bad command or config
  kDataError = 2,   // missing/corrupt inputs
  kInternalError = 3,
};

struct CommandResult {
  int status = kOk;
  std::string result_json;  // on success
  std::string error;        // on failure
};

// Dispatches one pipeline command with a JSON config. Unknown config keys are
// rejected. Commands: gen-houses, gen-episodes, stats, curate-bench, train,
// eval, replay.
CommandResult run_command(const std::string& command, const std::string& config_json);

}  // namespace domus::runner
