#pragma once

#include <filesystem>
#include <string>

#include "atomcast/dataset.hpp"
#include "atomcast/model.hpp"

namespace atomcast {

// Everything needed to run inference: architecture + parameters, the
// normalizer statistics fitted on the training segment, the window spec, and
// a reference to the threshold table the model was trained against.
struct Checkpoint {
    Model model;
    Normalizer normalizer;
    WindowSpec window;
    std::string thresholds_ref; // path of the tau table used during training
    double dt_fs = 1.0;
};

inline constexpr const char* checkpoint_format_tag = "atomcast.checkpoint.v1";

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace atomcast
