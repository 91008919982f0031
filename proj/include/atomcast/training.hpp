#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

#include "atomcast/dataset.hpp"
#include "atomcast/model.hpp"
#include "atomcast/morse.hpp"
#include "atomcast/rng.hpp"

namespace atomcast {

struct TrainConfig {
    double lambda = 5e-4;        // physics-loss weight
    int pairs_per_step = 500;    // M, atom pairs sampled per predicted step
    int batch_size = 16;         // B
    double learning_rate = 0.01; // eta
    double clip_norm = 1.0;      // global-norm gradient clip
    int max_epochs = 10;
    int patience = 3;            // early-stop epochs without validation improvement
    std::uint64_t seed = 0;
    bool physics_chain = true;   // apply the energy penalty at every step of the window
    double lr_plateau_decay = 0.0; // optional: multiply lr by this on non-improving epochs (0 = constant)
};

struct LossBreakdown {
    double mse = 0.0;   // normalized displacement space
    double phys = 0.0;  // mean Morse energy over violating pairs, eV
    double total = 0.0; // mse + lambda * phys
    long violating_pairs = 0;
};

struct PhysicsLossResult {
    double value = 0.0;
    // (step within window, atom i, atom j) of every threshold-exceeding pair
    std::vector<std::tuple<int, int, int>> violations;
};

// Energy penalty over sampled atom pairs. `pred_delta` holds L x 3N
// displacements in angstrom; positions are chained step by step from
// base_positions. Per step, `pairs_per_step` distinct pairs are drawn from
// `rng` (all pairs when it covers them); a pair contributes only when its
// Morse energy strictly exceeds its threshold. The value is the mean energy
// over all violating (step, pair) incidents, 0 when there are none.
PhysicsLossResult physics_loss(const Mat& pred_delta, const std::vector<Vec3>& base_positions,
                               const std::vector<std::string>& species, const MorseTable& morse,
                               const ThresholdTable& thresholds, int pairs_per_step, RngStream& rng,
                               bool chain_steps = true);

struct GradientResult {
    std::vector<double> grad; // d(total)/d(theta), averaged over the batch
    LossBreakdown loss;
};

// Reverse-mode gradient of mse + lambda * phys over a batch of raw (un-
// normalized) windows. The MSE term lives in normalized target space; the
// physics term de-normalizes predictions back to angstrom first. Pair
// sampling draws from `rng`, so a fixed stream makes the result
// deterministic.
GradientResult gradient(const Model& model, const std::vector<const WindowSample*>& batch,
                        const Normalizer& norm, const std::vector<std::string>& species,
                        const MorseTable& morse, const ThresholdTable& thresholds,
                        const TrainConfig& cfg, RngStream& rng);

// Loss without gradients (validation / reporting).
LossBreakdown evaluate_loss(const Model& model, const std::vector<WindowSample>& windows,
                            const Normalizer& norm, const std::vector<std::string>& species,
                            const MorseTable& morse, const ThresholdTable& thresholds,
                            const TrainConfig& cfg, std::uint64_t sampling_seed);

struct EpochLog {
    int epoch = 0;
    LossBreakdown train_loss;
    LossBreakdown valid_loss;
    double learning_rate = 0.0;
    bool improved = false;
};

struct TrainingLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;
    double best_valid_total = 0.0;
};

struct TrainResult {
    Model model; // parameters of the best validation epoch
    TrainingLog log;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) with global-norm clipping and
// early stopping on validation total loss. Deterministic given cfg.seed.
TrainResult train(Model model, const std::vector<WindowSample>& train_windows,
                  const std::vector<WindowSample>& valid_windows, const Normalizer& norm,
                  const std::vector<std::string>& species, const MorseTable& morse,
                  const ThresholdTable& thresholds, const TrainConfig& cfg);

// All unordered atom pairs (i < j) of an N-atom system, in a fixed order.
std::vector<std::pair<int, int>> all_atom_pairs(int n_atoms);

// Scales `values` so its Euclidean norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(std::vector<double>& values, double max_norm);

} // namespace atomcast
