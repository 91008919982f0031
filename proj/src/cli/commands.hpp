#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cli/config.hpp"

namespace atomcast::cli {

struct CommandEnv {
    PipelineConfig config;
    nlohmann::json resolved;       // config document after overrides
    std::filesystem::path run_dir; // out_dir / run_id
    std::ostream* out = &std::cout;
};

// Resolves the config, derives the run id, creates out_dir/<run_id>/ and
// saves the config snapshot there.
CommandEnv prepare_env(const std::string& command, const std::filesystem::path& config_path,
                       const std::vector<std::string>& overrides, std::ostream& out);

// Each command returns its process exit status (0 ok, 3 partial failure);
// config and runtime failures are reported by throwing.
int cmd_gen_data(CommandEnv& env);
int cmd_fit_morse(CommandEnv& env, const std::filesystem::path& samples_csv);
int cmd_thresholds(CommandEnv& env, const std::filesystem::path& traj_path);
int cmd_train(CommandEnv& env);
int cmd_rollout(CommandEnv& env, const std::filesystem::path& checkpoint_path);
int cmd_evaluate(CommandEnv& env, const std::filesystem::path& pred_path,
                 const std::filesystem::path& truth_path);
int cmd_ablate(CommandEnv& env);
int cmd_sweep_lambda(CommandEnv& env);
int cmd_diffusivity(CommandEnv& env, const std::filesystem::path& traj_path);

} // namespace atomcast::cli
