#pragma once

#include <string>
#include <vector>

#include "hoif/config.hpp"

namespace hoif {

struct RunResult {
  int exit_code = 0;          // 0 success, 1 runtime failure, 2 validation failure
  std::vector<std::string> files;
  std::string message;
};

// Executes a parsed experiment configuration, writing the JSON report and the
// CSV table under the configured output prefix. Never throws: failures are
// encoded in the exit code and a machine-readable error record on disk.
RunResult run_experiment(const ExperimentConfig& config);

// Convenience wrapper: load, validate, run.
RunResult run_config_file(const std::string& path, const std::string& task_override = "",
                          std::uint64_t seed_override = 0, int threads_override = 0,
                          const std::string& out_override = "");

}  // namespace hoif
