#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ctes {

// Structured experiment description loaded from a JSON config file.
// Unknown keys are rejected.
struct ExperimentConfig {
    std::string path;  // config file location (for error messages)
    std::string text;  // raw JSON text

    static ExperimentConfig load(const std::string& path);
};

// Executes one task end-to-end and writes metrics.json, curves.csv and
// checkpoints into the output directory. Returns the process exit code.
int run_experiment(const ExperimentConfig& cfg, const std::string& task,
                   std::optional<std::uint64_t> seed_override,
                   std::optional<std::string> out_override);

}  // namespace ctes
