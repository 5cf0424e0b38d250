// Command implementations behind the CLI: data generation, training in three
// modes, clustering, the contract market with baselines, and the experiment
// sweeps. Kept in the library so tests can drive them directly.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evmarket/config.hpp"

namespace evmarket::pipeline {

enum class TrainMode { dfel, dfel_cluster, centralized };

TrainMode parse_train_mode(const std::string& name);

struct CommandResult {
    int exit_code = 0;  // 0 ok, 1 usage/input error, 2 audit failure
    std::vector<std::string> notes;
};

CommandResult cmd_gen_data(const config::RunConfig& cfg);
CommandResult cmd_train(const config::RunConfig& cfg, TrainMode mode);
CommandResult cmd_cluster(const config::RunConfig& cfg);
CommandResult cmd_market(const config::RunConfig& cfg,
                         const std::filesystem::path& demands_csv);
CommandResult cmd_experiment(const config::RunConfig& cfg,
                             const std::string& name);

}  // namespace evmarket::pipeline
