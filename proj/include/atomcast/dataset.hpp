#pragma once

#include <cstddef>
#include <vector>

#include "atomcast/trajectory.hpp"

namespace atomcast {

// Minimal row-major matrix; the workhorse container for windows, model
// activations and predictions.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    std::size_t size() const { return data.size(); }
};

struct WindowSpec {
    int history = 64; // H
    int horizon = 16; // L
    int stride = 1;
};

// One supervised sample. Features are H x 6N with atom-major columns
// (Px, Py, Pz, dX, dY, dZ per atom); the lagged-displacement block of the
// very first trajectory step is zero. Targets are L x 3N displacements for
// the steps immediately following the history. base_positions holds the raw
// (un-normalized) positions of the last history frame: the anchor for
// reconstructing predicted positions.
struct WindowSample {
    Mat features;
    Mat targets;
    std::vector<Vec3> base_positions;
    std::size_t start_frame = 0; // index of the first history frame
};

// Sliding windows at starts {0, stride, 2*stride, ...}. Requires
// T >= H + L + 1; the produced count is (T - H - L)/stride + 1.
std::vector<WindowSample> make_windows(const Trajectory& traj, const WindowSpec& spec);

// Per-column z-score statistics, fitted on training windows only. Targets
// share the statistics of the matching displacement feature columns, so
// predictions can be mapped back to angstrom before any physics is applied.
class Normalizer {
public:
    Normalizer() = default;

    static Normalizer identity(std::size_t n_atoms);
    static Normalizer fit(const std::vector<WindowSample>& train_windows);

    std::size_t n_atoms() const { return feature_mean_.size() / 6; }
    bool empty() const { return feature_mean_.empty(); }

    Mat apply_features(const Mat& features) const;
    Mat apply_targets(const Mat& targets) const;
    Mat invert_targets(const Mat& normalized_targets) const;

    // displacement-column stats backing target column c (c in [0, 3N))
    double target_mean(std::size_t c) const;
    double target_sigma(std::size_t c) const;

    const std::vector<double>& feature_mean() const { return feature_mean_; }
    const std::vector<double>& feature_sigma() const { return feature_sigma_; }

    // for checkpoint loading
    Normalizer(std::vector<double> mean, std::vector<double> sigma);

private:
    std::vector<double> feature_mean_;  // 6N entries
    std::vector<double> feature_sigma_; // 6N entries, floored at 1e-8
};

// In-place normalization convenience for a whole window set.
std::vector<WindowSample> normalize_windows(const std::vector<WindowSample>& windows,
                                            const Normalizer& norm);

} // namespace atomcast
