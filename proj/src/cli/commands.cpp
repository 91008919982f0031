#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "atomcast/checkpoint.hpp"
#include "atomcast/metrics.hpp"
#include "atomcast/rng.hpp"
#include "atomcast/rollout.hpp"
#include "atomcast/traj_io.hpp"
#include "atomcast/training.hpp"

namespace atomcast::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
}

std::string aligned_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& row : rows) {
        if (width.size() < row.size()) width.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << std::left << std::setw(static_cast<int>(width[c]) + 2) << row[c];
        }
        out << "\n";
    }
    return out.str();
}

std::string ext_for(const std::string& format) { return format == "csv" ? ".csv" : ".xyz"; }

MorseTable load_morse_table(const PipelineConfig& cfg) {
    if (!cfg.morse.params_file.empty()) return read_morse_csv(cfg.morse.params_file);
    if (cfg.simgen.params.size() > 0) return cfg.simgen.params;
    throw InvalidConfig("no Morse parameters: set morse.params_file or simgen.params");
}

ThresholdGranularity granularity_of(const PipelineConfig& cfg) {
    return cfg.morse.thresholds_granularity == "atom" ? ThresholdGranularity::per_atom_pair
                                                      : ThresholdGranularity::per_species_pair;
}

int exhaustive_pairs(const Trajectory& traj) {
    const auto n = static_cast<int>(traj.n_atoms());
    return n * (n - 1) / 2;
}

int effective_pairs(int configured, const Trajectory& traj) {
    return configured <= 0 ? exhaustive_pairs(traj) : std::min(configured, exhaustive_pairs(traj));
}

struct Dataset {
    Trajectory train;
    Trajectory valid;
    Trajectory test;
};

Dataset generate_dataset(const PipelineConfig& cfg) {
    const SimConfig sim = cfg.simgen.to_sim_config(derive_seed(cfg.seed, "simgen.dataset"));
    const Trajectory traj = generate(sim);
    const std::size_t min_frames =
        static_cast<std::size_t>(cfg.window.history + cfg.window.horizon + 1);
    auto [train, valid, test] = split_dataset(traj, cfg.simgen.train_frac, cfg.simgen.valid_frac,
                                              min_frames);
    return {std::move(train), std::move(valid), std::move(test)};
}

struct TrainedModel {
    Model model;
    Normalizer normalizer;
    TrainingLog log;
};

TrainConfig make_train_config(const PipelineConfig& cfg, double lambda, std::uint64_t seed) {
    TrainConfig tc;
    tc.lambda = lambda;
    tc.pairs_per_step = cfg.train.pairs_per_step;
    tc.batch_size = cfg.train.batch_size;
    tc.learning_rate = cfg.train.learning_rate;
    tc.clip_norm = cfg.train.clip_norm;
    tc.max_epochs = cfg.train.max_epochs;
    tc.patience = cfg.train.patience;
    tc.seed = seed;
    tc.physics_chain = cfg.train.physics_chain;
    tc.lr_plateau_decay = cfg.train.lr_plateau_decay;
    return tc;
}

Architecture make_architecture(const PipelineConfig& cfg, std::size_t n_atoms) {
    Architecture arch;
    arch.kind = backbone_from_string(cfg.train.backbone);
    arch.history = cfg.window.history;
    arch.horizon = cfg.window.horizon;
    arch.n_atoms = static_cast<int>(n_atoms);
    arch.hidden = cfg.train.hidden;
    arch.blocks = cfg.train.blocks;
    return arch;
}

TrainedModel train_on(const PipelineConfig& cfg, const Trajectory& train_traj,
                      const Trajectory& valid_traj, const MorseTable& morse,
                      const ThresholdTable& tau_train, double lambda, std::uint64_t seed) {
    const WindowSpec spec{cfg.window.history, cfg.window.horizon, cfg.window.stride};
    const auto train_windows = make_windows(train_traj, spec);
    const auto valid_windows = make_windows(valid_traj, spec);
    const Normalizer norm = cfg.window.normalize ? Normalizer::fit(train_windows)
                                                 : Normalizer::identity(train_traj.n_atoms());
    // cap pair sampling at the exhaustive count so tiny systems stay exact
    TrainConfig tc = make_train_config(cfg, lambda, seed);
    tc.pairs_per_step = effective_pairs(tc.pairs_per_step, train_traj);

    const Model initial = make_model(make_architecture(cfg, train_traj.n_atoms()), seed);
    TrainResult result = train(initial, train_windows, valid_windows, norm, train_traj.species(),
                               morse, tau_train, tc);
    return {std::move(result.model), norm, std::move(result.log)};
}

void write_training_log_csv(const TrainingLog& log, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "epoch,train_mse,train_phys,train_total,train_violations,"
           "valid_mse,valid_phys,valid_total,valid_violations,learning_rate,improved\n";
    for (const auto& e : log.epochs) {
        out << e.epoch << "," << format_double(e.train_loss.mse) << ","
            << format_double(e.train_loss.phys) << "," << format_double(e.train_loss.total) << ","
            << e.train_loss.violating_pairs << "," << format_double(e.valid_loss.mse) << ","
            << format_double(e.valid_loss.phys) << "," << format_double(e.valid_loss.total) << ","
            << e.valid_loss.violating_pairs << "," << format_double(e.learning_rate) << ","
            << (e.improved ? 1 : 0) << "\n";
    }
}

struct CellMetrics {
    double mae_delta = 0.0;
    double mse_delta = 0.0;
    double v_r = 0.0;
    long frozen_steps = 0;
    bool diverged = false;
};

// rollout + forecast/violation metrics for one trained model on the test
// segment: history = first H frames, truth = the following total_steps
CellMetrics evaluate_rollout(const PipelineConfig& cfg, const Model& model, const Normalizer& norm,
                             const Trajectory& test, const MorseTable& morse,
                             const ThresholdTable& tau_reject, const ThresholdTable& tau_eval,
                             bool pii, std::uint64_t seed) {
    const auto h = static_cast<std::size_t>(cfg.window.history);
    const auto total = static_cast<std::size_t>(cfg.rollout.total_steps);
    if (test.n_frames() < h + total) {
        throw InvalidConfig("test segment has " + std::to_string(test.n_frames()) +
                            " frames; rollout needs H + total_steps = " + std::to_string(h + total));
    }
    RolloutConfig rc;
    rc.total_steps = static_cast<int>(total);
    rc.pii_enabled = pii;
    rc.pairs_per_step = effective_pairs(cfg.rollout.pairs_per_step, test);
    rc.seed = seed;
    rc.freeze_policy = freeze_policy_from_string(cfg.rollout.freeze_policy);

    CellMetrics cell;
    try {
        const auto [traj, log] = rollout(model, norm, test.slice(0, h), morse, tau_reject, rc);
        cell.frozen_steps = log.frozen_steps;
        // anchor frame plus the predicted segment, against the matching truth
        const auto pred_segment = traj.slice(h - 1, traj.n_frames());
        const auto truth_segment = test.slice(h - 1, h + total);
        const auto errors = forecast_errors(pred_segment, truth_segment);
        cell.mae_delta = errors.mae_delta;
        cell.mse_delta = errors.mse_delta;
        const auto predicted_only = traj.slice(h, traj.n_frames());
        const auto report = violations(predicted_only, morse, tau_eval,
                                       effective_pairs(cfg.eval.pairs_per_step, test),
                                       derive_seed(seed, "cell.violations"));
        cell.v_r = report.v_r;
    } catch (const NonFinitePrediction&) {
        cell.diverged = true;
        cell.mae_delta = std::numeric_limits<double>::infinity();
        cell.mse_delta = std::numeric_limits<double>::infinity();
        cell.v_r = std::numeric_limits<double>::quiet_NaN();
    }
    return cell;
}

} // namespace

CommandEnv prepare_env(const std::string& command, const fs::path& config_path,
                       const std::vector<std::string>& overrides, std::ostream& out) {
    CommandEnv env;
    env.resolved = resolved_document(config_path, overrides);
    env.config = parse_config(env.resolved);
    env.out = &out;
    const std::string run_id =
        env.config.run_id.empty() ? derive_run_id(command, env.resolved) : env.config.run_id;
    env.run_dir = fs::path(env.config.out_dir) / run_id;
    fs::create_directories(env.run_dir);
    std::ofstream snapshot(env.run_dir / "config.json");
    if (!snapshot) throw IoError("cannot write config snapshot under '" + env.run_dir.string() + "'");
    snapshot << env.resolved.dump(2) << "\n";
    out << "[" << command << "] run dir: " << env.run_dir.string() << "\n";
    return env;
}

int cmd_gen_data(CommandEnv& env) {
    const PipelineConfig& cfg = env.config;
    if (cfg.simgen.params.size() == 0) {
        throw InvalidConfig("gen-data requires simgen.params (ground-truth Morse parameters)");
    }
    const Dataset ds = generate_dataset(cfg);
    const std::string ext = ext_for(cfg.simgen.format);

    const fs::path train_path = env.run_dir / ("train" + ext);
    const fs::path valid_path = env.run_dir / ("valid" + ext);
    const fs::path test_path = env.run_dir / ("test" + ext);
    write_trajectory(ds.train, train_path);
    write_trajectory(ds.valid, valid_path);
    write_trajectory(ds.test, test_path);

    const fs::path morse_path = env.run_dir / "morse_true.csv";
    write_morse_csv(cfg.simgen.params, morse_path);

    json manifest;
    manifest["seed"] = cfg.seed;
    manifest["n_atoms"] = cfg.simgen.n_atoms;
    manifest["frames"] = {{"train", ds.train.n_frames()},
                          {"valid", ds.valid.n_frames()},
                          {"test", ds.test.n_frames()}};
    manifest["files"] = {{"train", train_path.filename().string()},
                         {"valid", valid_path.filename().string()},
                         {"test", test_path.filename().string()},
                         {"morse_true", morse_path.filename().string()}};

    if (cfg.simgen.emit_energy_samples) {
        const fs::path samples_path = env.run_dir / "energy_samples.csv";
        std::ofstream out(samples_path);
        if (!out) throw IoError("cannot open '" + samples_path.string() + "' for writing");
        out << "species_i,species_j,d,energy\n";
        std::size_t pair_index = 0;
        for (const auto& [key, p] : cfg.simgen.params.entries()) {
            RngStream rng(derive_seed(cfg.seed, "gen.samples", pair_index++));
            const auto dash = key.find('-');
            const double lo = 0.6 * p.eq_dist;
            const double hi = 3.0 * p.eq_dist;
            const int count = std::max(5, cfg.simgen.energy_sample_count);
            for (int k = 0; k < count; ++k) {
                const double d = lo + (hi - lo) * k / (count - 1);
                double e = morse_energy(p, d);
                if (cfg.simgen.energy_sample_noise_ev > 0.0) {
                    e += rng.normal(0.0, cfg.simgen.energy_sample_noise_ev);
                }
                out << key.substr(0, dash) << "," << key.substr(dash + 1) << "," << format_double(d)
                    << "," << format_double(e) << "\n";
            }
        }
        manifest["files"]["energy_samples"] = samples_path.filename().string();
    }

    write_text_file(env.run_dir / "manifest.json", manifest.dump(2) + "\n");
    *env.out << "wrote " << ds.train.n_frames() << "/" << ds.valid.n_frames() << "/"
             << ds.test.n_frames() << " train/valid/test frames for " << cfg.simgen.n_atoms
             << " atoms\n";
    return 0;
}

int cmd_fit_morse(CommandEnv& env, const fs::path& samples_csv) {
    std::ifstream in(samples_csv);
    if (!in) throw IoError("cannot open '" + samples_csv.string() + "' for reading");
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(samples_csv.string() + ":1: empty file");
    ++line_no;
    if (line != "species_i,species_j,d,energy" && line != "species_i,species_j,d,energy\r") {
        throw ParseError(samples_csv.string() + ":1: header must be 'species_i,species_j,d,energy'");
    }

    std::map<std::string, std::vector<std::pair<double, double>>> samples;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::istringstream row(line);
        std::string si, sj, d_text, e_text;
        if (!std::getline(row, si, ',') || !std::getline(row, sj, ',') ||
            !std::getline(row, d_text, ',') || !std::getline(row, e_text)) {
            throw ParseError(samples_csv.string() + ":" + std::to_string(line_no) +
                             ": expected 4 fields");
        }
        try {
            samples[species_pair_key(si, sj)].emplace_back(std::stod(d_text), std::stod(e_text));
        } catch (const std::exception&) {
            throw ParseError(samples_csv.string() + ":" + std::to_string(line_no) +
                             ": bad numeric value");
        }
    }
    if (samples.empty()) throw ParseError(samples_csv.string() + ": no sample rows");

    MorseTable fitted;
    std::vector<std::vector<std::string>> report_rows = {
        {"pair", "rmse", "iterations", "converged", "error"}};
    bool any_failed = false;
    for (const auto& [key, pair_samples] : samples) {
        const auto dash = key.find('-');
        try {
            const auto [params, report] = fit_morse(pair_samples);
            fitted.set(key.substr(0, dash), key.substr(dash + 1), params);
            report_rows.push_back({key, format_double(report.rmse), std::to_string(report.iterations),
                                   report.converged ? "1" : "0", ""});
        } catch (const Error& e) {
            any_failed = true;
            report_rows.push_back({key, "", "", "0", e.what()});
            *env.out << "fit failed for pair " << key << ": " << e.what() << "\n";
        }
    }

    if (fitted.size() > 0) write_morse_csv(fitted, env.run_dir / "morse_fitted.csv");
    std::ofstream report(env.run_dir / "fit_report.csv");
    if (!report) throw IoError("cannot write fit_report.csv");
    for (const auto& row : report_rows) {
        for (std::size_t c = 0; c < row.size(); ++c) report << (c ? "," : "") << row[c];
        report << "\n";
    }
    *env.out << aligned_table(report_rows);
    return any_failed ? 3 : 0;
}

int cmd_thresholds(CommandEnv& env, const fs::path& traj_path) {
    const Trajectory traj = read_trajectory(traj_path);
    const MorseTable morse = load_morse_table(env.config);
    const ThresholdTable table = compute_thresholds(traj, morse, granularity_of(env.config));
    write_threshold_csv(table, env.run_dir / "thresholds.csv");
    *env.out << "computed " << table.entries().size() << " thresholds over " << traj.n_frames()
             << " frames\n";
    return 0;
}

int cmd_train(CommandEnv& env) {
    const PipelineConfig& cfg = env.config;
    if (cfg.train.train_file.empty() || cfg.train.valid_file.empty()) {
        throw InvalidConfig("train requires train.train_file and train.valid_file");
    }
    const Trajectory train_traj = read_trajectory(cfg.train.train_file);
    const Trajectory valid_traj = read_trajectory(cfg.train.valid_file);
    const MorseTable morse = load_morse_table(cfg);

    ThresholdTable tau_train(granularity_of(cfg));
    std::string tau_ref;
    if (!cfg.train.thresholds_file.empty()) {
        tau_train = read_threshold_csv(cfg.train.thresholds_file);
        tau_ref = cfg.train.thresholds_file;
    } else {
        tau_train = compute_thresholds(train_traj, morse, granularity_of(cfg));
        const fs::path tau_path = env.run_dir / "thresholds_train.csv";
        write_threshold_csv(tau_train, tau_path);
        tau_ref = tau_path.string();
    }

    const TrainedModel trained = train_on(cfg, train_traj, valid_traj, morse, tau_train,
                                          cfg.train.active_lambda(), derive_seed(cfg.seed, "train"));

    Checkpoint ckpt;
    ckpt.model = trained.model;
    ckpt.normalizer = trained.normalizer;
    ckpt.window = WindowSpec{cfg.window.history, cfg.window.horizon, cfg.window.stride};
    ckpt.thresholds_ref = tau_ref;
    ckpt.dt_fs = train_traj.dt_fs();
    save_checkpoint(ckpt, env.run_dir / "checkpoint.json");
    write_training_log_csv(trained.log, env.run_dir / "training_log.csv");

    const auto& last = trained.log.epochs.back();
    *env.out << "trained " << cfg.train.backbone << " for " << trained.log.epochs.size()
             << " epochs (best epoch " << trained.log.best_epoch << ", valid total "
             << format_double(trained.log.best_valid_total) << ", last valid mse "
             << format_double(last.valid_loss.mse) << ")\n";
    return 0;
}

int cmd_rollout(CommandEnv& env, const fs::path& checkpoint_path) {
    const PipelineConfig& cfg = env.config;
    const fs::path ckpt_path =
        checkpoint_path.empty() ? fs::path(cfg.rollout.checkpoint) : checkpoint_path;
    if (ckpt_path.empty()) {
        throw InvalidConfig("rollout needs a checkpoint (argument or rollout.checkpoint)");
    }
    if (cfg.rollout.seed_file.empty()) throw InvalidConfig("rollout requires rollout.seed_file");

    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Trajectory seed_source = read_trajectory(cfg.rollout.seed_file);
    const auto h = static_cast<std::size_t>(ckpt.model.arch.history);
    if (seed_source.n_frames() < h) {
        throw InvalidConfig("seed file has " + std::to_string(seed_source.n_frames()) +
                            " frames; the model needs H = " + std::to_string(h));
    }
    const Trajectory seed_history = seed_source.slice(0, h);
    const MorseTable morse = load_morse_table(cfg);

    const std::string tau_path =
        cfg.rollout.thresholds_file.empty() ? ckpt.thresholds_ref : cfg.rollout.thresholds_file;
    if (tau_path.empty()) {
        throw InvalidConfig("no threshold table: set rollout.thresholds_file (checkpoint has none)");
    }
    const ThresholdTable tau_reject = read_threshold_csv(tau_path);

    RolloutConfig rc;
    rc.total_steps = cfg.rollout.total_steps;
    rc.pii_enabled = cfg.rollout.pii_enabled;
    rc.pairs_per_step = effective_pairs(cfg.rollout.pairs_per_step, seed_history);
    rc.seed = derive_seed(cfg.seed, "rollout");
    rc.freeze_policy = freeze_policy_from_string(cfg.rollout.freeze_policy);

    const auto [traj, log] = rollout(ckpt.model, ckpt.normalizer, seed_history, morse, tau_reject, rc);

    const fs::path pred_path = env.run_dir / ("predicted" + ext_for(cfg.simgen.format));
    write_trajectory(traj, pred_path);
    write_rollout_log_csv(log, env.run_dir / "rollout_log.csv");

    long violated = 0;
    for (const auto& s : log.steps) violated += s.violated ? 1 : 0;
    *env.out << "rolled out " << rc.total_steps << " steps (pii "
             << (rc.pii_enabled ? "on" : "off") << "): " << violated << " violating steps, "
             << log.frozen_steps << " frozen\n";
    return 0;
}

int cmd_evaluate(CommandEnv& env, const fs::path& pred_path, const fs::path& truth_path) {
    const PipelineConfig& cfg = env.config;
    const fs::path pred_file = pred_path.empty() ? fs::path(cfg.eval.pred_file) : pred_path;
    const fs::path truth_file = truth_path.empty() ? fs::path(cfg.eval.truth_file) : truth_path;
    if (pred_file.empty() || truth_file.empty()) {
        throw InvalidConfig("evaluate needs prediction and truth trajectories "
                            "(arguments or eval.pred_file/eval.truth_file)");
    }
    const Trajectory pred_full = read_trajectory(pred_file);
    const Trajectory truth_full = read_trajectory(truth_file);

    const auto skip = static_cast<std::size_t>(std::max(0, cfg.eval.skip_frames));
    if (pred_full.n_frames() <= skip + 1 || truth_full.n_frames() <= skip + 1) {
        throw InvalidConfig("eval.skip_frames leaves too few frames");
    }
    const Trajectory pred = pred_full.slice(skip, pred_full.n_frames());
    if (truth_full.n_frames() < skip + pred.n_frames()) {
        throw InvalidConfig("truth trajectory is shorter than the prediction");
    }
    const Trajectory truth = truth_full.slice(skip, skip + pred.n_frames());

    const MorseTable morse = load_morse_table(cfg);
    ThresholdTable tau(granularity_of(cfg));
    std::string tau_label = cfg.eval.threshold_table;
    if (cfg.eval.threshold_table == "test") {
        tau = compute_thresholds(truth_full, morse, granularity_of(cfg));
    } else if (cfg.eval.threshold_table == "train") {
        if (cfg.eval.train_file.empty()) {
            throw InvalidConfig("eval.threshold_table='train' requires eval.train_file");
        }
        tau = compute_thresholds(read_trajectory(cfg.eval.train_file), morse, granularity_of(cfg));
    } else {
        tau = read_threshold_csv(cfg.eval.threshold_table);
        tau_label = "file:" + cfg.eval.threshold_table;
    }

    const ForecastErrors errors = forecast_errors(pred, truth);
    // first compared frame is the shared anchor; violations cover the rest
    const Trajectory pred_only = pred.slice(1, pred.n_frames());
    const int m_used = effective_pairs(cfg.eval.pairs_per_step, pred_only);
    const std::uint64_t vio_seed = derive_seed(cfg.seed, "evaluate.violations");
    const ViolationReport vio = violations(pred_only, morse, tau, m_used, vio_seed);

    std::ofstream csv(env.run_dir / "metrics.csv");
    if (!csv) throw IoError("cannot write metrics.csv");
    csv << "metric,value,units,threshold_table,M,seed\n";
    const std::string meta = "," + tau_label + "," + std::to_string(m_used) + "," +
                             std::to_string(vio_seed);
    csv << "mse_delta," << format_double(errors.mse_delta) << ",angstrom^2" << meta << "\n";
    csv << "mae_delta," << format_double(errors.mae_delta) << ",angstrom" << meta << "\n";
    csv << "mse_r," << format_double(errors.mse_r) << ",angstrom^2" << meta << "\n";
    csv << "mae_r," << format_double(errors.mae_r) << ",angstrom" << meta << "\n";
    csv << "v_n," << vio.v_n << ",count" << meta << "\n";
    csv << "v_r," << format_double(vio.v_r) << ",rate" << meta << "\n";

    const std::vector<std::vector<std::string>> rows = {
        {"metric", "value", "units"},
        {"mse_delta", format_double(errors.mse_delta), "angstrom^2"},
        {"mae_delta", format_double(errors.mae_delta), "angstrom"},
        {"mse_r", format_double(errors.mse_r), "angstrom^2"},
        {"mae_r", format_double(errors.mae_r), "angstrom"},
        {"v_n", std::to_string(vio.v_n), "count"},
        {"v_r", format_double(vio.v_r), "rate (tau " + tau_label + ", M " + std::to_string(m_used) + ")"},
    };
    const std::string table = aligned_table(rows);
    write_text_file(env.run_dir / "summary.txt", table);
    *env.out << table;
    return 0;
}

namespace {

struct GridCell {
    std::string name;
    bool pit = false;
    bool pif = false;
    std::vector<CellMetrics> reps;

    CellMetrics mean() const {
        CellMetrics m;
        for (const auto& r : reps) {
            m.mae_delta += r.mae_delta;
            m.mse_delta += r.mse_delta;
            m.v_r += r.v_r;
            m.frozen_steps += r.frozen_steps;
            m.diverged = m.diverged || r.diverged;
        }
        const auto n = static_cast<double>(reps.size());
        m.mae_delta /= n;
        m.mse_delta /= n;
        m.v_r /= n;
        return m;
    }
};

} // namespace

int cmd_ablate(CommandEnv& env) {
    const PipelineConfig& cfg = env.config;
    if (cfg.simgen.params.size() == 0) {
        throw InvalidConfig("ablate requires simgen.params to generate its dataset");
    }
    const Dataset ds = generate_dataset(cfg);
    const MorseTable morse = load_morse_table(cfg);
    const ThresholdTable tau_train = compute_thresholds(ds.train, morse, granularity_of(cfg));
    const ThresholdTable tau_test = compute_thresholds(ds.test, morse, granularity_of(cfg));

    GridCell cells[4] = {
        {"baseline", false, false, {}},
        {"pit_only", true, false, {}},
        {"pif_only", false, true, {}},
        {"pit_pif", true, true, {}},
    };

    const double lambda = cfg.train.active_lambda();
    for (int rep = 0; rep < cfg.ablate.n_seeds; ++rep) {
        const auto r = static_cast<std::uint64_t>(rep);
        const TrainedModel base = train_on(cfg, ds.train, ds.valid, morse, tau_train, 0.0,
                                           derive_seed(cfg.seed, "ablate.train.base", r));
        const TrainedModel pit = train_on(cfg, ds.train, ds.valid, morse, tau_train, lambda,
                                          derive_seed(cfg.seed, "ablate.train.pit", r));
        for (auto& cell : cells) {
            const TrainedModel& m = cell.pit ? pit : base;
            cell.reps.push_back(evaluate_rollout(cfg, m.model, m.normalizer, ds.test, morse,
                                                 tau_train, tau_test, cell.pif,
                                                 derive_seed(cfg.seed, "ablate.roll." + cell.name, r)));
        }
        *env.out << "ablate: finished seed replicate " << rep + 1 << "/" << cfg.ablate.n_seeds
                 << "\n";
    }

    std::ofstream reps_csv(env.run_dir / "ablation_reps.csv");
    if (!reps_csv) throw IoError("cannot write ablation_reps.csv");
    reps_csv << "pit,pif,rep,mae_delta,mse_delta,v_r,frozen_steps,diverged\n";
    for (const auto& cell : cells) {
        for (std::size_t rep = 0; rep < cell.reps.size(); ++rep) {
            const auto& m = cell.reps[rep];
            reps_csv << (cell.pit ? 1 : 0) << "," << (cell.pif ? 1 : 0) << "," << rep << ","
                     << format_double(m.mae_delta) << "," << format_double(m.mse_delta) << ","
                     << format_double(m.v_r) << "," << m.frozen_steps << ","
                     << (m.diverged ? 1 : 0) << "\n";
        }
    }

    std::ofstream csv(env.run_dir / "ablation.csv");
    if (!csv) throw IoError("cannot write ablation.csv");
    csv << "pit,pif,mae_delta,mse_delta,v_r\n";
    std::vector<std::vector<std::string>> rows = {{"PIT", "PIF", "MAE_delta", "MSE_delta", "V_r"}};
    for (const auto& cell : cells) {
        const CellMetrics m = cell.mean();
        csv << (cell.pit ? 1 : 0) << "," << (cell.pif ? 1 : 0) << "," << format_double(m.mae_delta)
            << "," << format_double(m.mse_delta) << "," << format_double(m.v_r) << "\n";
        rows.push_back({cell.pit ? "on" : "off", cell.pif ? "on" : "off",
                        format_double(m.mae_delta), format_double(m.mse_delta),
                        format_double(m.v_r) + (m.diverged ? " (diverged)" : "")});
    }
    const std::string table = aligned_table(rows);
    write_text_file(env.run_dir / "summary.txt", table);
    *env.out << table;
    return 0;
}

int cmd_sweep_lambda(CommandEnv& env) {
    const PipelineConfig& cfg = env.config;
    if (cfg.simgen.params.size() == 0) {
        throw InvalidConfig("sweep-lambda requires simgen.params to generate its dataset");
    }
    const Dataset ds = generate_dataset(cfg);
    const MorseTable morse = load_morse_table(cfg);
    const ThresholdTable tau_train = compute_thresholds(ds.train, morse, granularity_of(cfg));
    const ThresholdTable tau_test = compute_thresholds(ds.test, morse, granularity_of(cfg));

    const std::vector<double> lambdas =
        cfg.train.lambda_was_list ? cfg.train.lambdas : std::vector<double>{0.0, 1e-4, 5e-4, 1e-3};

    std::ofstream reps_csv(env.run_dir / "sweep_reps.csv");
    if (!reps_csv) throw IoError("cannot write sweep_reps.csv");
    reps_csv << "lambda,rep,mae_delta,v_r,frozen_steps,diverged\n";

    std::ofstream csv(env.run_dir / "sweep.csv");
    if (!csv) throw IoError("cannot write sweep.csv");
    csv << "lambda,mae_delta,v_r\n";
    std::vector<std::vector<std::string>> rows = {{"lambda", "MAE_delta", "V_r"}};

    for (const double lambda : lambdas) {
        CellMetrics mean;
        for (int rep = 0; rep < cfg.sweep.n_seeds; ++rep) {
            const auto r = static_cast<std::uint64_t>(rep);
            // one training seed per replicate, shared across lambdas
            const TrainedModel m = train_on(cfg, ds.train, ds.valid, morse, tau_train, lambda,
                                            derive_seed(cfg.seed, "sweep.train", r));
            const CellMetrics cell =
                evaluate_rollout(cfg, m.model, m.normalizer, ds.test, morse, tau_train, tau_test,
                                 cfg.rollout.pii_enabled, derive_seed(cfg.seed, "sweep.roll", r));
            reps_csv << format_double(lambda) << "," << rep << "," << format_double(cell.mae_delta)
                     << "," << format_double(cell.v_r) << "," << cell.frozen_steps << ","
                     << (cell.diverged ? 1 : 0) << "\n";
            mean.mae_delta += cell.mae_delta;
            mean.v_r += cell.v_r;
            mean.diverged = mean.diverged || cell.diverged;
        }
        mean.mae_delta /= cfg.sweep.n_seeds;
        mean.v_r /= cfg.sweep.n_seeds;
        csv << format_double(lambda) << "," << format_double(mean.mae_delta) << ","
            << format_double(mean.v_r) << "\n";
        rows.push_back({format_double(lambda), format_double(mean.mae_delta),
                        format_double(mean.v_r) + (mean.diverged ? " (diverged)" : "")});
        *env.out << "sweep: finished lambda " << format_double(lambda) << "\n";
    }

    const std::string table = aligned_table(rows);
    write_text_file(env.run_dir / "summary.txt", table);
    *env.out << table;
    return 0;
}

int cmd_diffusivity(CommandEnv& env, const fs::path& traj_path) {
    const PipelineConfig& cfg = env.config;
    const Trajectory traj = read_trajectory(traj_path);
    const std::size_t lags = traj.n_frames() - 1;
    std::size_t fit_end = cfg.eval.msd_fit_end > 0 ? static_cast<std::size_t>(cfg.eval.msd_fit_end)
                                                   : std::max<std::size_t>(2, lags / 2);
    std::size_t fit_begin = cfg.eval.msd_fit_begin > 0
                                ? static_cast<std::size_t>(cfg.eval.msd_fit_begin)
                                : std::max<std::size_t>(1, fit_end / 5);
    const DiffusivityReport report =
        diffusivity(traj, cfg.eval.species, fit_begin, fit_end, cfg.eval.msd_multi_origin);

    std::ofstream csv(env.run_dir / "diffusivity.csv");
    if (!csv) throw IoError("cannot write diffusivity.csv");
    csv << "species,D_A2_per_fs,D_m2_per_s,slope,intercept,r_squared,fit_begin_fs,fit_end_fs,"
           "multi_origin\n";
    std::vector<std::vector<std::string>> rows = {{"species", "D [A^2/fs]", "D [m^2/s]", "R^2"}};
    for (const auto& [sp, d] : report.per_species) {
        csv << sp << "," << format_double(d.d_A2_per_fs) << "," << format_double(d.d_m2_per_s)
            << "," << format_double(d.slope) << "," << format_double(d.intercept) << ","
            << format_double(d.r_squared) << ","
            << format_double(static_cast<double>(fit_begin) * traj.dt_fs()) << ","
            << format_double(static_cast<double>(fit_end) * traj.dt_fs()) << ","
            << (report.multi_origin ? 1 : 0) << "\n";
        write_msd_csv(d.msd, env.run_dir / ("msd_" + sp + ".csv"));
        rows.push_back({sp, format_double(d.d_A2_per_fs), format_double(d.d_m2_per_s),
                        format_double(d.r_squared)});
    }
    const std::string table = aligned_table(rows);
    write_text_file(env.run_dir / "summary.txt", table);
    *env.out << table;
    return 0;
}

} // namespace atomcast::cli
