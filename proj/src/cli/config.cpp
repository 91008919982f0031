#include "cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "atomcast/errors.hpp"
#include "atomcast/rollout.hpp"

namespace atomcast::cli {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::string& block,
                         const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw InvalidConfig("unknown config key '" + (block.empty() ? key : block + "." + key) + "'");
        }
    }
}

template <typename T>
void read_field(const json& obj, const std::string& block, const char* key, T& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw InvalidConfig("config key '" + block + "." + key + "' has the wrong type");
    }
}

Thermostat parse_thermostat(const json& obj) {
    reject_unknown_keys(obj, "simgen.thermostat", {"kind", "gamma_per_fs", "rescale_interval"});
    Thermostat t;
    std::string kind = "langevin";
    read_field(obj, "simgen.thermostat", "kind", kind);
    if (kind == "none") {
        t.kind = ThermostatKind::none;
    } else if (kind == "langevin") {
        t.kind = ThermostatKind::langevin;
    } else if (kind == "velocity_rescale") {
        t.kind = ThermostatKind::velocity_rescale;
    } else {
        throw InvalidConfig("unknown thermostat kind '" + kind + "'");
    }
    read_field(obj, "simgen.thermostat", "gamma_per_fs", t.gamma_per_fs);
    read_field(obj, "simgen.thermostat", "rescale_interval", t.rescale_interval);
    return t;
}

MorseTable parse_pair_params(const json& obj) {
    MorseTable table;
    for (const auto& [key, value] : obj.items()) {
        const auto dash = key.find('-');
        if (dash == std::string::npos) {
            throw InvalidConfig("simgen.params key '" + key + "' must look like 'A-B'");
        }
        reject_unknown_keys(value, "simgen.params." + key, {"D_e", "a", "d_e", "b"});
        MorseParams p;
        read_field(value, "simgen.params." + key, "D_e", p.depth);
        read_field(value, "simgen.params." + key, "a", p.steepness);
        read_field(value, "simgen.params." + key, "d_e", p.eq_dist);
        read_field(value, "simgen.params." + key, "b", p.offset);
        table.set(key.substr(0, dash), key.substr(dash + 1), p);
    }
    return table;
}

SimgenBlock parse_simgen(const json& obj) {
    reject_unknown_keys(obj, "simgen",
                        {"n_atoms", "species_counts", "box_side", "temperature_K", "n_steps",
                         "dt_fs", "thermostat", "cutoff", "reflective_walls", "mass_amu",
                         "split", "format", "emit_energy_samples", "energy_sample_count",
                         "energy_sample_noise_ev", "params"});
    SimgenBlock b;
    read_field(obj, "simgen", "n_atoms", b.n_atoms);
    if (obj.contains("species_counts")) {
        b.species_counts.clear();
        for (const auto& [sp, count] : obj.at("species_counts").items()) {
            b.species_counts.emplace_back(sp, count.get<int>());
        }
    }
    read_field(obj, "simgen", "box_side", b.box_side);
    read_field(obj, "simgen", "temperature_K", b.temperature_K);
    read_field(obj, "simgen", "n_steps", b.n_steps);
    read_field(obj, "simgen", "dt_fs", b.dt_fs);
    if (obj.contains("thermostat")) b.thermostat = parse_thermostat(obj.at("thermostat"));
    read_field(obj, "simgen", "cutoff", b.cutoff);
    read_field(obj, "simgen", "reflective_walls", b.reflective_walls);
    read_field(obj, "simgen", "mass_amu", b.mass_amu);
    if (obj.contains("split")) {
        const json& split = obj.at("split");
        reject_unknown_keys(split, "simgen.split", {"train_frac", "valid_frac"});
        read_field(split, "simgen.split", "train_frac", b.train_frac);
        read_field(split, "simgen.split", "valid_frac", b.valid_frac);
        if (!(b.train_frac > 0.0) || !(b.valid_frac > 0.0) || !(b.train_frac + b.valid_frac < 1.0)) {
            throw InvalidConfig("simgen.split fractions must be positive and sum below 1");
        }
    }
    read_field(obj, "simgen", "format", b.format);
    if (b.format != "xyz" && b.format != "csv") {
        throw InvalidConfig("simgen.format must be 'xyz' or 'csv'");
    }
    read_field(obj, "simgen", "emit_energy_samples", b.emit_energy_samples);
    read_field(obj, "simgen", "energy_sample_count", b.energy_sample_count);
    read_field(obj, "simgen", "energy_sample_noise_ev", b.energy_sample_noise_ev);
    if (obj.contains("params")) b.params = parse_pair_params(obj.at("params"));
    return b;
}

MorseBlock parse_morse(const json& obj) {
    reject_unknown_keys(obj, "morse", {"params_file", "thresholds_granularity"});
    MorseBlock b;
    read_field(obj, "morse", "params_file", b.params_file);
    read_field(obj, "morse", "thresholds_granularity", b.thresholds_granularity);
    if (b.thresholds_granularity != "species" && b.thresholds_granularity != "atom") {
        throw InvalidConfig("morse.thresholds_granularity must be 'species' or 'atom'");
    }
    return b;
}

WindowBlock parse_window(const json& obj) {
    reject_unknown_keys(obj, "window", {"H", "L", "stride", "normalize"});
    WindowBlock b;
    read_field(obj, "window", "H", b.history);
    read_field(obj, "window", "L", b.horizon);
    read_field(obj, "window", "stride", b.stride);
    read_field(obj, "window", "normalize", b.normalize);
    if (b.history < 1 || b.horizon < 1 || b.stride < 1) {
        throw InvalidConfig("window.H, window.L and window.stride must be >= 1");
    }
    return b;
}

TrainBlock parse_train(const json& obj) {
    reject_unknown_keys(obj, "train",
                        {"backbone", "hidden", "blocks", "lambda", "pairs_per_step", "batch_size",
                         "learning_rate", "clip_norm", "max_epochs", "patience", "physics_chain",
                         "lr_plateau_decay", "train_file", "valid_file", "thresholds_file"});
    TrainBlock b;
    read_field(obj, "train", "backbone", b.backbone);
    read_field(obj, "train", "hidden", b.hidden);
    read_field(obj, "train", "blocks", b.blocks);
    if (obj.contains("lambda")) {
        const json& lam = obj.at("lambda");
        b.lambdas.clear();
        if (lam.is_array()) {
            for (const auto& v : lam) b.lambdas.push_back(v.get<double>());
            b.lambda_was_list = true;
        } else {
            b.lambdas.push_back(lam.get<double>());
        }
        if (b.lambdas.empty()) throw InvalidConfig("train.lambda must not be an empty list");
        for (const double l : b.lambdas) {
            if (l < 0.0) throw InvalidConfig("train.lambda values must be >= 0");
        }
    }
    read_field(obj, "train", "pairs_per_step", b.pairs_per_step);
    read_field(obj, "train", "batch_size", b.batch_size);
    read_field(obj, "train", "learning_rate", b.learning_rate);
    read_field(obj, "train", "clip_norm", b.clip_norm);
    read_field(obj, "train", "max_epochs", b.max_epochs);
    read_field(obj, "train", "patience", b.patience);
    read_field(obj, "train", "physics_chain", b.physics_chain);
    read_field(obj, "train", "lr_plateau_decay", b.lr_plateau_decay);
    read_field(obj, "train", "train_file", b.train_file);
    read_field(obj, "train", "valid_file", b.valid_file);
    read_field(obj, "train", "thresholds_file", b.thresholds_file);
    return b;
}

RolloutBlock parse_rollout(const json& obj) {
    reject_unknown_keys(obj, "rollout",
                        {"total_steps", "pii_enabled", "pairs_per_step", "freeze_policy",
                         "seed_file", "checkpoint", "thresholds_file"});
    RolloutBlock b;
    read_field(obj, "rollout", "total_steps", b.total_steps);
    read_field(obj, "rollout", "pii_enabled", b.pii_enabled);
    read_field(obj, "rollout", "pairs_per_step", b.pairs_per_step);
    read_field(obj, "rollout", "freeze_policy", b.freeze_policy);
    freeze_policy_from_string(b.freeze_policy); // validates the name
    read_field(obj, "rollout", "seed_file", b.seed_file);
    read_field(obj, "rollout", "checkpoint", b.checkpoint);
    read_field(obj, "rollout", "thresholds_file", b.thresholds_file);
    return b;
}

EvalBlock parse_eval(const json& obj) {
    reject_unknown_keys(obj, "eval",
                        {"pairs_per_step", "threshold_table", "train_file", "skip_frames",
                         "pred_file", "truth_file", "species", "msd_fit_begin", "msd_fit_end",
                         "msd_multi_origin"});
    EvalBlock b;
    read_field(obj, "eval", "pairs_per_step", b.pairs_per_step);
    read_field(obj, "eval", "threshold_table", b.threshold_table);
    read_field(obj, "eval", "train_file", b.train_file);
    read_field(obj, "eval", "skip_frames", b.skip_frames);
    read_field(obj, "eval", "pred_file", b.pred_file);
    read_field(obj, "eval", "truth_file", b.truth_file);
    read_field(obj, "eval", "species", b.species);
    read_field(obj, "eval", "msd_fit_begin", b.msd_fit_begin);
    read_field(obj, "eval", "msd_fit_end", b.msd_fit_end);
    read_field(obj, "eval", "msd_multi_origin", b.msd_multi_origin);
    return b;
}

AblateBlock parse_ablate(const json& obj) {
    reject_unknown_keys(obj, "ablate", {"n_seeds"});
    AblateBlock b;
    read_field(obj, "ablate", "n_seeds", b.n_seeds);
    if (b.n_seeds < 1) throw InvalidConfig("ablate.n_seeds must be >= 1");
    return b;
}

SweepBlock parse_sweep(const json& obj) {
    reject_unknown_keys(obj, "sweep", {"n_seeds"});
    SweepBlock b;
    read_field(obj, "sweep", "n_seeds", b.n_seeds);
    if (b.n_seeds < 1) throw InvalidConfig("sweep.n_seeds must be >= 1");
    return b;
}

json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text); // plain string value
    }
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw InvalidConfig("--set expects block.key=value, got '" + assignment + "'");
    }
    const std::string path = assignment.substr(0, eq);
    const json value = parse_override_value(assignment.substr(eq + 1));

    json* node = &doc;
    std::size_t begin = 0;
    while (true) {
        const auto dot = path.find('.', begin);
        const std::string key =
            dot == std::string::npos ? path.substr(begin) : path.substr(begin, dot - begin);
        if (key.empty()) throw InvalidConfig("--set path '" + path + "' has an empty segment");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        begin = dot + 1;
    }
}

} // namespace

SimConfig SimgenBlock::to_sim_config(std::uint64_t seed) const {
    SimConfig c;
    c.n_atoms = n_atoms;
    c.species_counts = species_counts;
    c.box_side = box_side;
    c.temperature_K = temperature_K;
    c.n_steps = n_steps;
    c.dt_fs = dt_fs;
    c.thermostat = thermostat;
    c.seed = seed;
    c.morse = params;
    c.cutoff = cutoff;
    c.reflective_walls = reflective_walls;
    c.mass_amu = mass_amu;
    return c;
}

PipelineConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw InvalidConfig("config root must be a JSON object");
    reject_unknown_keys(doc, "",
                        {"seed", "out_dir", "run_id", "simgen", "morse", "window", "train",
                         "rollout", "eval", "ablate", "sweep"});
    PipelineConfig cfg;
    read_field(doc, "", "seed", cfg.seed);
    read_field(doc, "", "out_dir", cfg.out_dir);
    read_field(doc, "", "run_id", cfg.run_id);
    if (doc.contains("simgen")) cfg.simgen = parse_simgen(doc.at("simgen"));
    if (doc.contains("morse")) cfg.morse = parse_morse(doc.at("morse"));
    if (doc.contains("window")) cfg.window = parse_window(doc.at("window"));
    if (doc.contains("train")) cfg.train = parse_train(doc.at("train"));
    if (doc.contains("rollout")) cfg.rollout = parse_rollout(doc.at("rollout"));
    if (doc.contains("eval")) cfg.eval = parse_eval(doc.at("eval"));
    if (doc.contains("ablate")) cfg.ablate = parse_ablate(doc.at("ablate"));
    if (doc.contains("sweep")) cfg.sweep = parse_sweep(doc.at("sweep"));
    return cfg;
}

nlohmann::json resolved_document(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw InvalidConfig("cannot open config file '" + path.string() + "'");
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw InvalidConfig("config file '" + path.string() + "': " + std::string(e.what()));
        }
    }
    for (const auto& assignment : overrides) apply_override(doc, assignment);
    return doc;
}

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides) {
    return parse_config(resolved_document(path, overrides));
}

PipelineConfig default_config(const std::vector<std::string>& overrides) {
    return load_config({}, overrides);
}

std::string derive_run_id(const std::string& command, const json& resolved) {
    json stripped = resolved;
    if (stripped.contains("out_dir")) stripped.erase("out_dir");
    if (stripped.contains("run_id")) stripped.erase("run_id");
    const std::string text = command + "\n" + stripped.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : text) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return command + "-" + std::string(buf).substr(0, 12);
}

} // namespace atomcast::cli
