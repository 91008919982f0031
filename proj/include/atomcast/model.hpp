#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atomcast/dataset.hpp"

namespace atomcast {

enum class BackboneKind { linear, mlp, channel_mix };

BackboneKind backbone_from_string(const std::string& name);
std::string backbone_to_string(BackboneKind kind);

// Shape-level description of a forecaster. The flat parameter vector of a
// Model is laid out deterministically from this descriptor alone, which is
// what makes checkpoints self-describing.
struct Architecture {
    BackboneKind kind = BackboneKind::linear;
    int history = 64;          // H
    int horizon = 16;          // L
    int n_atoms = 0;           // N
    std::vector<int> hidden = {64, 64}; // mlp layer widths
    int blocks = 1;            // channel_mix depth

    std::size_t in_dim() const { return static_cast<std::size_t>(history) * 6 * static_cast<std::size_t>(n_atoms); }
    std::size_t out_dim() const { return static_cast<std::size_t>(horizon) * 3 * static_cast<std::size_t>(n_atoms); }
    std::size_t channels() const { return 6 * static_cast<std::size_t>(n_atoms); }
};

std::size_t param_count(const Architecture& arch);

// A backbone plus its flat parameter vector theta.
struct Model {
    Architecture arch;
    std::vector<double> params;
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
Model make_model(const Architecture& arch, std::uint64_t seed);

// Cached intermediate activations from a forward pass; consumed by backward.
struct ForwardTrace {
    std::vector<std::vector<double>> layer_pre;  // mlp: z per layer
    std::vector<std::vector<double>> layer_post; // mlp: activations per layer
    std::vector<Mat> block_input;                // channel_mix: X entering each block
    std::vector<Mat> block_time_pre;             // Zt
    std::vector<Mat> block_mid;                  // X after time mixing
    std::vector<Mat> block_channel_pre;          // Zc
    Mat final_state;                             // channel_mix: X entering the head
};

// features: H x 6N (normalized space) -> prediction: L x 3N.
Mat forward(const Model& model, const Mat& features);
Mat forward(const Model& model, const Mat& features, ForwardTrace& trace);

// Accumulates d(loss)/d(theta) into grad_params given d(loss)/d(prediction).
// `trace` must come from a forward pass of the same model on `features`.
void backward(const Model& model, const Mat& features, const ForwardTrace& trace,
              const Mat& grad_prediction, std::vector<double>& grad_params);

} // namespace atomcast
