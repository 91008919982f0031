#include "atomcast/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "atomcast/errors.hpp"

namespace atomcast {

using nlohmann::json;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    if (ckpt.model.params.size() != param_count(ckpt.model.arch)) {
        throw ShapeMismatch("checkpoint parameter vector does not match its architecture");
    }
    json j;
    j["format"] = checkpoint_format_tag;
    j["architecture"] = {
        {"backbone", backbone_to_string(ckpt.model.arch.kind)},
        {"history", ckpt.model.arch.history},
        {"horizon", ckpt.model.arch.horizon},
        {"n_atoms", ckpt.model.arch.n_atoms},
        {"hidden", ckpt.model.arch.hidden},
        {"blocks", ckpt.model.arch.blocks},
    };
    j["params"] = ckpt.model.params;
    j["normalizer"] = {
        {"mean", ckpt.normalizer.feature_mean()},
        {"sigma", ckpt.normalizer.feature_sigma()},
    };
    j["window"] = {
        {"H", ckpt.window.history},
        {"L", ckpt.window.horizon},
        {"stride", ckpt.window.stride},
    };
    j["thresholds_ref"] = ckpt.thresholds_ref;
    j["dt_fs"] = ckpt.dt_fs;

    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != checkpoint_format_tag) {
            throw ParseError(path.string() + ": unsupported checkpoint format '" +
                             j.at("format").get<std::string>() + "'");
        }
        Checkpoint ckpt;
        const json& arch = j.at("architecture");
        ckpt.model.arch.kind = backbone_from_string(arch.at("backbone").get<std::string>());
        ckpt.model.arch.history = arch.at("history").get<int>();
        ckpt.model.arch.horizon = arch.at("horizon").get<int>();
        ckpt.model.arch.n_atoms = arch.at("n_atoms").get<int>();
        ckpt.model.arch.hidden = arch.at("hidden").get<std::vector<int>>();
        ckpt.model.arch.blocks = arch.at("blocks").get<int>();
        ckpt.model.params = j.at("params").get<std::vector<double>>();
        if (ckpt.model.params.size() != param_count(ckpt.model.arch)) {
            throw ParseError(path.string() + ": parameter count does not match the architecture");
        }
        ckpt.normalizer = Normalizer(j.at("normalizer").at("mean").get<std::vector<double>>(),
                                     j.at("normalizer").at("sigma").get<std::vector<double>>());
        ckpt.window.history = j.at("window").at("H").get<int>();
        ckpt.window.horizon = j.at("window").at("L").get<int>();
        ckpt.window.stride = j.at("window").at("stride").get<int>();
        ckpt.thresholds_ref = j.at("thresholds_ref").get<std::string>();
        ckpt.dt_fs = j.at("dt_fs").get<double>();
        return ckpt;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace atomcast
