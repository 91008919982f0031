#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomcast/morse.hpp"
#include "atomcast/simgen.hpp"

namespace atomcast::cli {

// Pipeline configuration: one JSON file with a block per subsystem plus a
// global seed and output directory. Unknown keys are rejected by name.

struct SimgenBlock {
    int n_atoms = 16;
    std::vector<std::pair<std::string, int>> species_counts = {{"A", 8}, {"B", 8}};
    double box_side = 7.5;
    double temperature_K = 900.0;
    int n_steps = 7000;
    double dt_fs = 1.0;
    Thermostat thermostat{ThermostatKind::langevin, 0.05, 10};
    double cutoff = 7.0;
    bool reflective_walls = true;
    double mass_amu = 10.0;
    double train_frac = 0.75;
    double valid_frac = 0.10;
    std::string format = "xyz"; // trajectory file format: xyz | csv
    bool emit_energy_samples = true;
    int energy_sample_count = 20;
    double energy_sample_noise_ev = 0.0;
    MorseTable params; // ground-truth pair parameters driving the simulation

    SimConfig to_sim_config(std::uint64_t seed) const;
};

struct MorseBlock {
    std::string params_file;                      // fitted parameters CSV
    std::string thresholds_granularity = "species"; // species | atom
};

struct WindowBlock {
    int history = 16;  // H
    int horizon = 8;   // L
    int stride = 1;
    bool normalize = true;
};

struct TrainBlock {
    std::string backbone = "mlp"; // linear | mlp | channel_mix
    std::vector<int> hidden = {48, 48};
    int blocks = 1;
    std::vector<double> lambdas = {5e-4}; // `lambda`: scalar or list (list = sweep grid)
    bool lambda_was_list = false;         // sweep-lambda uses its own default grid otherwise
    int pairs_per_step = 500;
    int batch_size = 16;
    double learning_rate = 0.01;
    double clip_norm = 1.0;
    int max_epochs = 10;
    int patience = 3;
    bool physics_chain = true;
    double lr_plateau_decay = 0.0;
    std::string train_file;
    std::string valid_file;
    std::string thresholds_file;

    double active_lambda() const { return lambdas.empty() ? 0.0 : lambdas.front(); }
};

struct RolloutBlock {
    int total_steps = 1000;
    bool pii_enabled = true;
    int pairs_per_step = 500;
    std::string freeze_policy = "freeze_all";
    std::string seed_file;        // trajectory providing the seed history
    std::string checkpoint;       // model checkpoint path
    std::string thresholds_file;  // tau table for rejection; defaults to the checkpoint's
};

struct EvalBlock {
    int pairs_per_step = 0; // 0 = exhaustive
    std::string threshold_table = "test"; // test | train | path to a CSV
    std::string train_file;  // needed when threshold_table == "train"
    int skip_frames = 0;
    std::string pred_file;
    std::string truth_file;
    // diffusivity settings
    std::vector<std::string> species;
    int msd_fit_begin = 0; // 0 = auto (10% of available lags)
    int msd_fit_end = 0;   // 0 = auto (50% of available lags)
    bool msd_multi_origin = true;
};

struct AblateBlock {
    int n_seeds = 3;
};

struct SweepBlock {
    int n_seeds = 3;
};

struct PipelineConfig {
    std::uint64_t seed = 12345;
    std::string out_dir = "runs";
    std::string run_id; // empty = derived from the config content
    SimgenBlock simgen;
    MorseBlock morse;
    WindowBlock window;
    TrainBlock train;
    RolloutBlock rollout;
    EvalBlock eval;
    AblateBlock ablate;
    SweepBlock sweep;
};

// Parses and validates a config JSON document. Throws InvalidConfig naming
// any unknown key.
PipelineConfig parse_config(const nlohmann::json& doc);

// Reads the file, applies `--set block.key=value` overrides, parses.
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides);

// Built-in defaults when no config file is given.
PipelineConfig default_config(const std::vector<std::string>& overrides);

// The resolved document that parse_config saw (after overrides); saved next
// to every command's outputs.
nlohmann::json resolved_document(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides);

// Deterministic run id: hash of the command name and the resolved config
// with out_dir/run_id removed, so relocating outputs does not change it.
std::string derive_run_id(const std::string& command, const nlohmann::json& resolved);

} // namespace atomcast::cli
