#include "atomcast/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "atomcast/rng.hpp"
#include "atomcast/traj_io.hpp"
#include "atomcast/training.hpp"

namespace atomcast {

FreezePolicy freeze_policy_from_string(const std::string& name) {
    if (name == "freeze_all") return FreezePolicy::freeze_all;
    if (name == "freeze_violating") return FreezePolicy::freeze_violating;
    throw InvalidConfig("unknown freeze policy '" + name + "'");
}

std::string freeze_policy_to_string(FreezePolicy policy) {
    return policy == FreezePolicy::freeze_all ? "freeze_all" : "freeze_violating";
}

std::pair<Trajectory, RolloutLog> rollout(const Model& model, const Normalizer& norm,
                                          const Trajectory& seed_history, const MorseTable& morse,
                                          const ThresholdTable& thresholds,
                                          const RolloutConfig& config) {
    const auto h = static_cast<std::size_t>(model.arch.history);
    const auto l = static_cast<std::size_t>(model.arch.horizon);
    const std::size_t n = seed_history.n_atoms();
    if (static_cast<std::size_t>(model.arch.n_atoms) != n) {
        throw ShapeMismatch("model was built for " + std::to_string(model.arch.n_atoms) +
                            " atoms, seed history has " + std::to_string(n));
    }
    if (seed_history.n_frames() < h) {
        throw TrajectoryTooShort("seed history needs at least H = " + std::to_string(h) +
                                 " frames, got " + std::to_string(seed_history.n_frames()));
    }
    if (config.total_steps < 1) throw InvalidConfig("total_steps must be >= 1");
    if (config.pii_enabled && config.pairs_per_step < 1) {
        throw InvalidConfig("pii_enabled requires pairs_per_step >= 1");
    }

    const auto& species = seed_history.species();
    const auto pairs = all_atom_pairs(static_cast<int>(n));
    RngStream pair_rng(derive_seed(config.seed, "rollout.pairs"));

    std::vector<std::vector<Vec3>> positions;
    positions.reserve(seed_history.n_frames() + static_cast<std::size_t>(config.total_steps));
    for (const Frame& f : seed_history.frames()) positions.push_back(f.positions);

    RolloutLog log;
    log.steps.reserve(static_cast<std::size_t>(config.total_steps));

    int produced = 0;
    while (produced < config.total_steps) {
        // window over the last H frames, displacements relative to the frame
        // before each row (zero at the very first trajectory frame)
        const std::size_t cur = positions.size() - 1;
        Mat features(h, 6 * n);
        for (std::size_t row = 0; row < h; ++row) {
            const std::size_t g = cur - h + 1 + row;
            double* f = features.row(row);
            for (std::size_t i = 0; i < n; ++i) {
                const Vec3& p = positions[g][i];
                const Vec3 d = g == 0 ? Vec3{} : p - positions[g - 1][i];
                f[6 * i + 0] = p.x;
                f[6 * i + 1] = p.y;
                f[6 * i + 2] = p.z;
                f[6 * i + 3] = d.x;
                f[6 * i + 4] = d.y;
                f[6 * i + 5] = d.z;
            }
        }

        const Mat pred = norm.invert_targets(forward(model, norm.apply_features(features)));
        const auto steps_now = std::min<std::size_t>(l, static_cast<std::size_t>(config.total_steps - produced));

        for (std::size_t step = 0; step < steps_now; ++step) {
            ++produced;
            RolloutStepLog entry;
            entry.step = produced;
            entry.max_energy = std::numeric_limits<double>::quiet_NaN();

            const double* delta = pred.row(step);
            for (std::size_t k = 0; k < 3 * n; ++k) {
                if (!std::isfinite(delta[k])) {
                    throw NonFinitePrediction("non-finite displacement at predicted step " +
                                              std::to_string(produced));
                }
            }

            std::vector<Vec3> next = positions.back();
            for (std::size_t i = 0; i < n; ++i) {
                next[i].x += delta[3 * i + 0];
                next[i].y += delta[3 * i + 1];
                next[i].z += delta[3 * i + 2];
            }

            if (config.pii_enabled) {
                const auto chosen =
                    pair_rng.sample_without_replacement(static_cast<int>(pairs.size()), config.pairs_per_step);
                entry.n_pairs_checked = static_cast<int>(chosen.size());
                for (const int k : chosen) {
                    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
                    const double d = (next[static_cast<std::size_t>(i)] - next[static_cast<std::size_t>(j)]).norm();
                    const double e = morse_energy(
                        morse.lookup(species[static_cast<std::size_t>(i)], species[static_cast<std::size_t>(j)]), d);
                    if (!(e <= entry.max_energy)) { // also true for the initial nan
                        entry.max_energy = e;
                        entry.key_of_max = atom_pair_key(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                    }
                    const double tau =
                        thresholds.lookup(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                          species[static_cast<std::size_t>(i)], species[static_cast<std::size_t>(j)]);
                    if (e > tau) {
                        entry.violated = true;
                        entry.violating_pairs.emplace_back(i, j);
                    }
                }
                if (entry.violated) {
                    entry.frozen = true;
                    ++log.frozen_steps;
                    if (config.freeze_policy == FreezePolicy::freeze_all) {
                        next = positions.back();
                    } else {
                        for (const auto& [i, j] : entry.violating_pairs) {
                            next[static_cast<std::size_t>(i)] = positions.back()[static_cast<std::size_t>(i)];
                            next[static_cast<std::size_t>(j)] = positions.back()[static_cast<std::size_t>(j)];
                        }
                    }
                }
            }

            positions.push_back(std::move(next));
            log.steps.push_back(std::move(entry));
        }
    }

    std::vector<Frame> frames;
    frames.reserve(positions.size());
    const long first_step = seed_history.frame(0).step_index;
    for (std::size_t t = 0; t < positions.size(); ++t) {
        frames.push_back(Frame{std::move(positions[t]), first_step + static_cast<long>(t)});
    }
    return {Trajectory(species, std::move(frames), seed_history.dt_fs()), std::move(log)};
}

std::map<std::string, std::pair<Trajectory, RolloutLog>> batch_rollout(
    const std::vector<RolloutJob>& jobs, const Trajectory& seed_history, const MorseTable& morse,
    const ThresholdTable& thresholds) {
    std::map<std::string, std::pair<Trajectory, RolloutLog>> out;
    for (const RolloutJob& job : jobs) {
        if (job.model == nullptr || job.norm == nullptr) {
            throw InvalidConfig("batch_rollout job '" + job.name + "' is missing a model");
        }
        out.emplace(job.name, rollout(*job.model, *job.norm, seed_history, morse, thresholds, job.config));
    }
    return out;
}

void write_rollout_log_csv(const RolloutLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "step,violated,frozen,n_pairs_checked,max_energy,key_of_max\n";
    for (const auto& s : log.steps) {
        out << s.step << "," << (s.violated ? 1 : 0) << "," << (s.frozen ? 1 : 0) << ","
            << s.n_pairs_checked << "," << format_double(s.max_energy) << "," << s.key_of_max
            << "\n";
    }
}

} // namespace atomcast
