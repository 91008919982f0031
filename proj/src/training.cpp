#include "atomcast/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace atomcast {

std::vector<std::pair<int, int>> all_atom_pairs(int n_atoms) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(n_atoms) * static_cast<std::size_t>(n_atoms - 1) / 2);
    for (int i = 0; i < n_atoms; ++i) {
        for (int j = i + 1; j < n_atoms; ++j) pairs.emplace_back(i, j);
    }
    return pairs;
}

double clip_global_norm(std::vector<double>& values, double max_norm) {
    double norm2 = 0.0;
    for (const double v : values) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (double& v : values) v *= scale;
    }
    return norm;
}

namespace {

// chained positions r_{l+1} = r_l + delta_l for the whole window
std::vector<std::vector<Vec3>> chain_positions(const Mat& pred_delta,
                                               const std::vector<Vec3>& base) {
    const std::size_t n = base.size();
    std::vector<std::vector<Vec3>> pos(pred_delta.rows + 1);
    pos[0] = base;
    for (std::size_t l = 0; l < pred_delta.rows; ++l) {
        pos[l + 1] = pos[l];
        const double* row = pred_delta.row(l);
        for (std::size_t i = 0; i < n; ++i) {
            pos[l + 1][i].x += row[3 * i + 0];
            pos[l + 1][i].y += row[3 * i + 1];
            pos[l + 1][i].z += row[3 * i + 2];
        }
    }
    return pos;
}

struct PhysicsGradient {
    PhysicsLossResult result;
    // d(mean violating energy)/d(delta) in angstrom space, L x 3N; empty when
    // no pair violates
    Mat grad_delta;
};

PhysicsGradient physics_loss_impl(const Mat& pred_delta, const std::vector<Vec3>& base,
                                  const std::vector<std::string>& species, const MorseTable& morse,
                                  const ThresholdTable& thresholds, int pairs_per_step,
                                  RngStream& rng, bool chain_steps, bool want_gradient) {
    const int n = static_cast<int>(base.size());
    if (pred_delta.cols != 3 * static_cast<std::size_t>(n)) {
        throw ShapeMismatch("prediction width does not match base positions");
    }
    if (pairs_per_step < 1) throw InvalidConfig("pairs_per_step must be >= 1");

    const auto pairs = all_atom_pairs(n);
    const int total_pairs = static_cast<int>(pairs.size());
    const auto pos = chain_positions(pred_delta, base);
    const std::size_t steps = chain_steps ? pred_delta.rows : std::min<std::size_t>(1, pred_delta.rows);

    PhysicsGradient out;
    // per-step accumulated dE/dr for violating pairs (summed energies first;
    // normalized by the violation count afterwards)
    std::vector<std::vector<Vec3>> grad_pos;
    if (want_gradient) grad_pos.assign(steps, std::vector<Vec3>(static_cast<std::size_t>(n)));

    double energy_sum = 0.0;
    for (std::size_t l = 0; l < steps; ++l) {
        const auto& r = pos[l + 1];
        const auto chosen = rng.sample_without_replacement(total_pairs, pairs_per_step);
        for (const int k : chosen) {
            const auto [i, j] = pairs[static_cast<std::size_t>(k)];
            const Vec3 rij = r[static_cast<std::size_t>(i)] - r[static_cast<std::size_t>(j)];
            const double d = rij.norm();
            const MorseParams& mp = morse.lookup(species[static_cast<std::size_t>(i)],
                                                 species[static_cast<std::size_t>(j)]);
            const double e = morse_energy(mp, d);
            const double tau = thresholds.lookup(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                                 species[static_cast<std::size_t>(i)],
                                                 species[static_cast<std::size_t>(j)]);
            if (e > tau) {
                energy_sum += e;
                out.result.violations.emplace_back(static_cast<int>(l), i, j);
                if (want_gradient) {
                    const double dE_dd = morse_energy_derivative(mp, d);
                    const Vec3 dir = rij * (dE_dd / d);
                    grad_pos[l][static_cast<std::size_t>(i)] += dir;
                    grad_pos[l][static_cast<std::size_t>(j)] -= dir;
                }
            }
        }
    }

    const auto count = static_cast<double>(out.result.violations.size());
    if (count > 0.0) {
        out.result.value = energy_sum / count;
        if (want_gradient) {
            // r_{l+1} depends on every delta_s with s <= l, so d/d(delta_s)
            // is the suffix sum of the positional gradients
            out.grad_delta = Mat(pred_delta.rows, pred_delta.cols);
            std::vector<Vec3> acc(static_cast<std::size_t>(n));
            for (std::size_t l = steps; l-- > 0;) {
                for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
                    acc[i] += grad_pos[l][i];
                }
                double* row = out.grad_delta.row(l);
                for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
                    row[3 * i + 0] = acc[i].x / count;
                    row[3 * i + 1] = acc[i].y / count;
                    row[3 * i + 2] = acc[i].z / count;
                }
            }
        }
    }
    return out;
}

} // namespace

PhysicsLossResult physics_loss(const Mat& pred_delta, const std::vector<Vec3>& base_positions,
                               const std::vector<std::string>& species, const MorseTable& morse,
                               const ThresholdTable& thresholds, int pairs_per_step, RngStream& rng,
                               bool chain_steps) {
    return physics_loss_impl(pred_delta, base_positions, species, morse, thresholds, pairs_per_step,
                             rng, chain_steps, false)
        .result;
}

GradientResult gradient(const Model& model, const std::vector<const WindowSample*>& batch,
                        const Normalizer& norm, const std::vector<std::string>& species,
                        const MorseTable& morse, const ThresholdTable& thresholds,
                        const TrainConfig& cfg, RngStream& rng) {
    if (batch.empty()) throw EmptyDataset("gradient needs a non-empty batch");

    GradientResult out;
    out.grad.assign(model.params.size(), 0.0);
    const auto batch_n = static_cast<double>(batch.size());
    const auto out_dim = model.arch.out_dim();

    for (const WindowSample* sample : batch) {
        const Mat x = norm.apply_features(sample->features);
        const Mat y = norm.apply_targets(sample->targets);

        ForwardTrace trace;
        const Mat pred = forward(model, x, trace);
        if (pred.rows != y.rows || pred.cols != y.cols) {
            throw ShapeMismatch("prediction shape does not match targets");
        }

        // d(batch mse)/d(pred), normalized space
        Mat grad_pred(pred.rows, pred.cols);
        double se = 0.0;
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const double r = pred.data[k] - y.data[k];
            se += r * r;
            grad_pred.data[k] = 2.0 * r / (static_cast<double>(out_dim) * batch_n);
        }
        out.loss.mse += se / static_cast<double>(out_dim) / batch_n;

        if (cfg.lambda > 0.0) {
            const Mat pred_angstrom = norm.invert_targets(pred);
            const PhysicsGradient pg =
                physics_loss_impl(pred_angstrom, sample->base_positions, species, morse, thresholds,
                                  cfg.pairs_per_step, rng, cfg.physics_chain, true);
            out.loss.phys += pg.result.value / batch_n;
            out.loss.violating_pairs += static_cast<long>(pg.result.violations.size());
            if (!pg.result.violations.empty()) {
                // de-normalization is per-column linear, so the chain factor
                // is the column sigma
                const double scale = cfg.lambda / batch_n;
                for (std::size_t r = 0; r < grad_pred.rows; ++r) {
                    double* grow = grad_pred.row(r);
                    const double* prow = pg.grad_delta.row(r);
                    for (std::size_t c = 0; c < grad_pred.cols; ++c) {
                        grow[c] += scale * prow[c] * norm.target_sigma(c);
                    }
                }
            }
        }

        backward(model, x, trace, grad_pred, out.grad);
    }

    out.loss.total = out.loss.mse + cfg.lambda * out.loss.phys;
    if (!std::isfinite(out.loss.total)) {
        throw NonFiniteLoss("batch loss is not finite (mse=" + std::to_string(out.loss.mse) +
                            ", phys=" + std::to_string(out.loss.phys) + ")");
    }
    for (const double g : out.grad) {
        if (!std::isfinite(g)) throw NonFiniteGradient("gradient contains a non-finite entry");
    }
    return out;
}

LossBreakdown evaluate_loss(const Model& model, const std::vector<WindowSample>& windows,
                            const Normalizer& norm, const std::vector<std::string>& species,
                            const MorseTable& morse, const ThresholdTable& thresholds,
                            const TrainConfig& cfg, std::uint64_t sampling_seed) {
    if (windows.empty()) throw EmptyDataset("evaluate_loss needs a non-empty window set");
    RngStream rng(sampling_seed);
    LossBreakdown out;
    const auto n = static_cast<double>(windows.size());
    const auto out_dim = static_cast<double>(model.arch.out_dim());

    for (const auto& sample : windows) {
        const Mat x = norm.apply_features(sample.features);
        const Mat y = norm.apply_targets(sample.targets);
        const Mat pred = forward(model, x);
        double se = 0.0;
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const double r = pred.data[k] - y.data[k];
            se += r * r;
        }
        out.mse += se / out_dim / n;

        const Mat pred_angstrom = norm.invert_targets(pred);
        const PhysicsLossResult pl =
            physics_loss(pred_angstrom, sample.base_positions, species, morse, thresholds,
                         cfg.pairs_per_step, rng, cfg.physics_chain);
        out.phys += pl.value / n;
        out.violating_pairs += static_cast<long>(pl.violations.size());
    }
    out.total = out.mse + cfg.lambda * out.phys;
    if (!std::isfinite(out.total)) throw NonFiniteLoss("validation loss is not finite");
    return out;
}

TrainResult train(Model model, const std::vector<WindowSample>& train_windows,
                  const std::vector<WindowSample>& valid_windows, const Normalizer& norm,
                  const std::vector<std::string>& species, const MorseTable& morse,
                  const ThresholdTable& thresholds, const TrainConfig& cfg) {
    if (train_windows.empty() || valid_windows.empty()) {
        throw EmptyDataset("train requires non-empty train and validation window sets");
    }
    if (cfg.batch_size < 1 || cfg.max_epochs < 1 || !(cfg.learning_rate > 0.0) ||
        !(cfg.clip_norm > 0.0) || cfg.lambda < 0.0 || cfg.pairs_per_step < 1) {
        throw InvalidConfig("invalid training configuration");
    }

    RngStream shuffle_rng(derive_seed(cfg.seed, "train.shuffle"));
    RngStream pair_rng(derive_seed(cfg.seed, "train.pairs"));

    const std::size_t n_params = model.params.size();
    std::vector<double> m1(n_params, 0.0);
    std::vector<double> m2(n_params, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long adam_t = 0;
    double lr = cfg.learning_rate;

    std::vector<std::size_t> order(train_windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    result.log.best_epoch = -1;
    double best_valid = std::numeric_limits<double>::infinity();
    std::vector<double> best_params = model.params;
    int stale_epochs = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        LossBreakdown epoch_loss;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const WindowSample*> batch;
            batch.reserve(end - begin);
            for (std::size_t k = begin; k < end; ++k) batch.push_back(&train_windows[order[k]]);

            GradientResult gr;
            try {
                gr = gradient(model, batch, norm, species, morse, thresholds, cfg, pair_rng);
            } catch (const NonFiniteLoss& e) {
                throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batches) + ": " + e.what());
            } catch (const NonFiniteGradient& e) {
                throw NonFiniteGradient("epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batches) + ": " + e.what());
            }

            clip_global_norm(gr.grad, cfg.clip_norm);

            ++adam_t;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
            for (std::size_t k = 0; k < n_params; ++k) {
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * gr.grad[k];
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * gr.grad[k] * gr.grad[k];
                model.params[k] -= lr * (m1[k] / bc1) / (std::sqrt(m2[k] / bc2) + eps);
            }

            epoch_loss.mse += gr.loss.mse;
            epoch_loss.phys += gr.loss.phys;
            epoch_loss.total += gr.loss.total;
            epoch_loss.violating_pairs += gr.loss.violating_pairs;
            ++batches;
        }
        if (batches > 0) {
            epoch_loss.mse /= static_cast<double>(batches);
            epoch_loss.phys /= static_cast<double>(batches);
            epoch_loss.total /= static_cast<double>(batches);
        }

        const LossBreakdown valid_loss =
            evaluate_loss(model, valid_windows, norm, species, morse, thresholds, cfg,
                          derive_seed(cfg.seed, "train.valid", static_cast<std::uint64_t>(epoch)));

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = epoch_loss;
        log.valid_loss = valid_loss;
        log.learning_rate = lr;
        log.improved = valid_loss.total < best_valid;
        result.log.epochs.push_back(log);

        if (log.improved) {
            best_valid = valid_loss.total;
            best_params = model.params;
            result.log.best_epoch = epoch;
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (cfg.lr_plateau_decay > 0.0 && cfg.lr_plateau_decay < 1.0) {
                lr *= cfg.lr_plateau_decay;
            }
            if (stale_epochs >= cfg.patience) break;
        }
    }

    model.params = std::move(best_params);
    result.log.best_valid_total = best_valid;
    result.model = std::move(model);
    return result;
}

} // namespace atomcast
