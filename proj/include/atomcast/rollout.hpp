#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "atomcast/dataset.hpp"
#include "atomcast/model.hpp"
#include "atomcast/morse.hpp"

namespace atomcast {

// What to do with a step whose sampled pairs exceed a threshold.
// freeze_all zeroes the whole displacement frame (every atom stays put);
// freeze_violating zeroes only atoms that appear in a violating pair.
enum class FreezePolicy { freeze_all, freeze_violating };

FreezePolicy freeze_policy_from_string(const std::string& name);
std::string freeze_policy_to_string(FreezePolicy policy);

struct RolloutConfig {
    int total_steps = 1000;   // T, predicted frames appended after the seed
    bool pii_enabled = false; // energy-guarded inference
    int pairs_per_step = 500; // M, pairs checked per predicted step
    std::uint64_t seed = 0;   // pair-sampling stream, independent of training
    FreezePolicy freeze_policy = FreezePolicy::freeze_all;
};

struct RolloutStepLog {
    int step = 0; // 1-based predicted step
    bool violated = false;
    bool frozen = false;
    int n_pairs_checked = 0;
    double max_energy = 0.0; // max Morse energy over checked pairs; nan when none checked
    std::string key_of_max;  // atom-pair key "i:j"
    std::vector<std::pair<int, int>> violating_pairs;
};

struct RolloutLog {
    std::vector<RolloutStepLog> steps;
    long frozen_steps = 0;
};

// Autoregressive trajectory generation. Feature windows are rebuilt from the
// model's own (post-correction) predictions; with pii_enabled, a step whose
// sampled pair energies exceed their thresholds is replaced with a zero
// displacement before it feeds the next window. The result carries the seed
// history followed by exactly total_steps predicted frames.
std::pair<Trajectory, RolloutLog> rollout(const Model& model, const Normalizer& norm,
                                          const Trajectory& seed_history, const MorseTable& morse,
                                          const ThresholdTable& thresholds,
                                          const RolloutConfig& config);

struct RolloutJob {
    std::string name;
    const Model* model = nullptr;
    const Normalizer* norm = nullptr;
    RolloutConfig config;
};

// Independent rollouts from one shared seed history, keyed by job name.
std::map<std::string, std::pair<Trajectory, RolloutLog>> batch_rollout(
    const std::vector<RolloutJob>& jobs, const Trajectory& seed_history, const MorseTable& morse,
    const ThresholdTable& thresholds);

// CSV `step,violated,frozen,n_pairs_checked,max_energy,key_of_max`.
void write_rollout_log_csv(const RolloutLog& log, const std::filesystem::path& path);

} // namespace atomcast
