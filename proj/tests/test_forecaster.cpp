#include <doctest.h>

#include <cmath>

#include "atomcast/dataset.hpp"
#include "atomcast/model.hpp"
#include "atomcast/rng.hpp"
#include "atomcast/training.hpp"

using namespace atomcast;

namespace {

Trajectory seeded_trajectory(std::size_t n_atoms, std::size_t n_frames, std::uint64_t seed,
                             double box = 8.0, double step_sigma = 0.05) {
    RngStream rng(seed);
    std::vector<std::string> species;
    for (std::size_t i = 0; i < n_atoms; ++i) species.push_back(i % 2 == 0 ? "A" : "B");
    std::vector<Frame> frames;
    Frame f;
    f.step_index = 0;
    for (std::size_t i = 0; i < n_atoms; ++i) {
        f.positions.push_back({rng.uniform(1.0, box), rng.uniform(1.0, box), rng.uniform(1.0, box)});
    }
    frames.push_back(f);
    for (std::size_t t = 1; t < n_frames; ++t) {
        Frame next = frames.back();
        next.step_index = static_cast<long>(t);
        for (auto& p : next.positions) {
            p.x += rng.normal(0.0, step_sigma);
            p.y += rng.normal(0.0, step_sigma);
            p.z += rng.normal(0.0, step_sigma);
        }
        frames.push_back(next);
    }
    return Trajectory(species, frames, 1.0);
}

MorseTable test_morse() {
    MorseTable t;
    t.set("A", "A", {1.0, 1.5, 2.0, -1.0});
    t.set("A", "B", {1.2, 1.4, 2.2, -1.2});
    t.set("B", "B", {0.9, 1.6, 2.4, -0.9});
    return t;
}

// thresholds below the curve minimum: every sampled pair violates, which
// keeps the physics loss smooth for finite-difference checks
ThresholdTable always_violating_thresholds() {
    ThresholdTable t(ThresholdGranularity::per_species_pair);
    t.set("A-A", -2.0);
    t.set("A-B", -2.0);
    t.set("B-B", -2.0);
    return t;
}

Architecture small_arch(BackboneKind kind, int n_atoms) {
    Architecture a;
    a.kind = kind;
    a.history = 3;
    a.horizon = 2;
    a.n_atoms = n_atoms;
    a.hidden = {10, 8};
    a.blocks = 1;
    return a;
}

} // namespace

TEST_CASE("zero linear model predicts zero displacements") {
    Architecture arch = small_arch(BackboneKind::linear, 2);
    Model m{arch, std::vector<double>(param_count(arch), 0.0)};
    Mat x(3, 12);
    for (std::size_t k = 0; k < x.size(); ++k) x.data[k] = static_cast<double>(k) * 0.1;
    const Mat y = forward(m, x);
    REQUIRE(y.rows == 2);
    REQUIRE(y.cols == 6);
    for (const double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("linear model with copy weights reproduces the last displacement block") {
    const int n = 2;
    Architecture arch = small_arch(BackboneKind::linear, n);
    Model m{arch, std::vector<double>(param_count(arch), 0.0)};
    const std::size_t in_dim = arch.in_dim();
    // route feature (last row, delta column) -> every output row
    for (int l = 0; l < arch.horizon; ++l) {
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) {
                const std::size_t out_idx =
                    static_cast<std::size_t>(l) * 3 * n + static_cast<std::size_t>(3 * i + k);
                const std::size_t in_idx =
                    static_cast<std::size_t>(arch.history - 1) * 6 * n +
                    static_cast<std::size_t>(6 * i + 3 + k);
                m.params[out_idx * in_dim + in_idx] = 1.0;
            }
        }
    }
    Mat x(3, 12);
    RngStream rng(4);
    for (std::size_t k = 0; k < x.size(); ++k) x.data[k] = rng.normal();
    const Mat y = forward(m, x);
    for (int l = 0; l < arch.horizon; ++l) {
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) {
                CHECK(y.at(static_cast<std::size_t>(l), static_cast<std::size_t>(3 * i + k)) ==
                      doctest::Approx(x.at(2, static_cast<std::size_t>(6 * i + 3 + k))));
            }
        }
    }
}

TEST_CASE("mlp forward equals an independent matrix-arithmetic recomputation") {
    Architecture arch = small_arch(BackboneKind::mlp, 2);
    const Model m = make_model(arch, 42);
    Mat x(3, 12);
    RngStream rng(5);
    for (std::size_t k = 0; k < x.size(); ++k) x.data[k] = rng.normal();

    const Mat y = forward(m, x);

    // oracle: explicit loops, own gelu
    auto gelu_ref = [](double v) {
        return 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
    };
    const std::size_t dims[4] = {arch.in_dim(), 10, 8, arch.out_dim()};
    std::vector<double> act(x.data);
    std::size_t off = 0;
    for (int layer = 0; layer < 3; ++layer) {
        const std::size_t in = dims[layer], out = dims[layer + 1];
        std::vector<double> z(out);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = m.params[off + out * in + o]; // bias
            for (std::size_t i = 0; i < in; ++i) acc += m.params[off + o * in + i] * act[i];
            z[o] = layer < 2 ? gelu_ref(acc) : acc;
        }
        off += out * in + out;
        act = std::move(z);
    }
    REQUIRE(act.size() == y.size());
    for (std::size_t k = 0; k < act.size(); ++k) {
        CHECK(y.data[k] == doctest::Approx(act[k]).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects shape mismatches") {
    Architecture arch = small_arch(BackboneKind::linear, 2);
    const Model m = make_model(arch, 1);
    Mat bad(4, 12);
    CHECK_THROWS_AS(forward(m, bad), ShapeMismatch);
}

TEST_CASE("physics loss is zero when nothing moves beyond its history") {
    const auto traj = seeded_trajectory(4, 2, 21);
    const auto morse = test_morse();
    const auto thresholds = compute_thresholds(traj, morse, ThresholdGranularity::per_species_pair);

    Mat pred(2, 12); // all-zero displacements
    RngStream rng(3);
    const auto res = physics_loss(pred, traj.frame(0).positions, traj.species(), morse, thresholds,
                                  100, rng);
    CHECK(res.value == 0.0);
    CHECK(res.violations.empty());
}

TEST_CASE("a forced collapse contributes exactly its pair energy") {
    // two atoms at equilibrium; the prediction drives them to 0.1 * eq_dist
    const MorseParams p{1.0, 1.5, 2.0, -1.0};
    MorseTable morse;
    morse.set("A", "A", p);
    std::vector<Frame> frames = {Frame{{{0, 0, 0}, {p.eq_dist, 0, 0}}, 0}};
    const Trajectory base({"A", "A"}, frames, 1.0);
    const auto thresholds = compute_thresholds(base, morse, ThresholdGranularity::per_species_pair);

    Mat pred(1, 6);
    pred.at(0, 0) = 0.9 * p.eq_dist; // atom 0 moves toward atom 1
    RngStream rng(3);
    const auto res = physics_loss(pred, base.frame(0).positions, base.species(), morse, thresholds,
                                  10, rng);
    REQUIRE(res.violations.size() == 1);
    CHECK(res.value == doctest::Approx(morse_energy(p, 0.1 * p.eq_dist)).epsilon(1e-12));
}

TEST_CASE("exhaustive physics loss matches a brute-force recomputation") {
    const auto traj = seeded_trajectory(4, 2, 31, 5.0);
    const auto morse = test_morse();
    ThresholdTable thresholds(ThresholdGranularity::per_species_pair);
    // mid-level taus so some pairs violate and others do not
    thresholds.set("A-A", -0.5);
    thresholds.set("A-B", -0.6);
    thresholds.set("B-B", -0.4);

    Mat pred(3, 12);
    RngStream prng(8);
    for (std::size_t k = 0; k < pred.size(); ++k) pred.data[k] = prng.normal(0.0, 0.4);

    RngStream rng(3);
    const auto res = physics_loss(pred, traj.frame(0).positions, traj.species(), morse, thresholds,
                                  6 /* all pairs of 4 atoms */, rng);

    // oracle: chain positions and loop over every step and pair
    std::vector<Vec3> pos = traj.frame(0).positions;
    double sum = 0.0;
    int count = 0;
    for (std::size_t l = 0; l < pred.rows; ++l) {
        for (std::size_t i = 0; i < 4; ++i) {
            pos[i].x += pred.at(l, 3 * i + 0);
            pos[i].y += pred.at(l, 3 * i + 1);
            pos[i].z += pred.at(l, 3 * i + 2);
        }
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = i + 1; j < 4; ++j) {
                const double d = (pos[i] - pos[j]).norm();
                const double e = morse_energy(morse.lookup(traj.species()[i], traj.species()[j]), d);
                const double tau = thresholds.lookup(i, j, traj.species()[i], traj.species()[j]);
                if (e > tau) {
                    sum += e;
                    ++count;
                }
            }
        }
    }
    REQUIRE(count > 0);
    CHECK(static_cast<int>(res.violations.size()) == count);
    CHECK(res.value == doctest::Approx(sum / count).epsilon(1e-12));
}

TEST_CASE("a pair sitting exactly at its threshold is not a violation") {
    const MorseParams p{1.0, 1.5, 2.0, -1.0};
    MorseTable morse;
    morse.set("A", "A", p);
    std::vector<Vec3> base = {{0, 0, 0}, {3.0, 0, 0}};
    ThresholdTable thresholds(ThresholdGranularity::per_species_pair);
    thresholds.set("A-A", morse_energy(p, 3.0)); // exactly the resting energy
    Mat pred(1, 6);                              // zero displacement keeps d == 3.0
    RngStream rng(1);
    const auto res = physics_loss(pred, base, {"A", "A"}, morse, thresholds, 1, rng);
    CHECK(res.violations.empty());
    CHECK(res.value == 0.0);
}

namespace {

struct GradCheckFixture {
    std::vector<WindowSample> windows;
    Normalizer norm;
    std::vector<std::string> species;
    MorseTable morse = test_morse();
    ThresholdTable thresholds = always_violating_thresholds();

    explicit GradCheckFixture(std::uint64_t seed) {
        const auto traj = seeded_trajectory(4, 24, seed, 6.0, 0.2);
        windows = make_windows(traj, WindowSpec{3, 2, 3});
        norm = Normalizer::fit(windows);
        species = traj.species();
    }
};

double loss_at(const Model& model, const GradCheckFixture& fx, const TrainConfig& cfg,
               std::uint64_t seed) {
    std::vector<const WindowSample*> batch;
    for (const auto& w : fx.windows) batch.push_back(&w);
    RngStream rng(seed);
    Model probe = model;
    return gradient(probe, batch, fx.norm, fx.species, fx.morse, fx.thresholds, cfg, rng).loss.total;
}

void run_fd_check(BackboneKind kind, double lambda) {
    GradCheckFixture fx(1234);
    Architecture arch = small_arch(kind, 4);
    Model model = make_model(arch, 99);

    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.pairs_per_step = 6; // exhaustive for 4 atoms

    std::vector<const WindowSample*> batch;
    for (const auto& w : fx.windows) batch.push_back(&w);
    RngStream rng(555);
    const auto result = gradient(model, batch, fx.norm, fx.species, fx.morse, fx.thresholds, cfg, rng);

    RngStream pick(kind == BackboneKind::linear ? 7u : 8u);
    const int checks = 50;
    for (int c = 0; c < checks; ++c) {
        const auto k = static_cast<std::size_t>(pick.next_u64() % model.params.size());
        const double h = 1e-5;
        Model plus = model;
        plus.params[k] += h;
        Model minus = model;
        minus.params[k] -= h;
        const double fd = (loss_at(plus, fx, cfg, 555) - loss_at(minus, fx, cfg, 555)) / (2 * h);
        const double an = result.grad[k];
        const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
        CHECK(std::fabs(fd - an) / denom < 1e-4);
    }
}

} // namespace

TEST_CASE("gradient matches finite differences: linear backbone") {
    run_fd_check(BackboneKind::linear, 0.0);
    run_fd_check(BackboneKind::linear, 5e-4);
}

TEST_CASE("gradient matches finite differences: mlp backbone") {
    run_fd_check(BackboneKind::mlp, 0.0);
    run_fd_check(BackboneKind::mlp, 5e-4);
}

TEST_CASE("gradient matches finite differences: channel_mix backbone") {
    run_fd_check(BackboneKind::channel_mix, 0.0);
    run_fd_check(BackboneKind::channel_mix, 5e-4);
}

TEST_CASE("gradient at a zero-loss configuration is zero") {
    // constant trajectory: all targets zero, zero model reproduces them
    std::vector<Frame> frames;
    for (int t = 0; t < 12; ++t) frames.push_back(Frame{{{1, 1, 1}, {4, 4, 4}}, t});
    const Trajectory traj({"A", "A"}, frames, 1.0);
    const auto windows = make_windows(traj, WindowSpec{3, 2, 1});
    const auto norm = Normalizer::identity(2);

    Architecture arch = small_arch(BackboneKind::linear, 2);
    Model model{arch, std::vector<double>(param_count(arch), 0.0)};

    TrainConfig cfg;
    cfg.lambda = 5e-4;
    cfg.pairs_per_step = 1;
    MorseTable morse;
    morse.set("A", "A", {1.0, 1.5, 2.0, -1.0});
    const auto thresholds = compute_thresholds(traj, morse, ThresholdGranularity::per_species_pair);

    std::vector<const WindowSample*> batch;
    for (const auto& w : windows) batch.push_back(&w);
    RngStream rng(2);
    const auto result = gradient(model, batch, norm, traj.species(), morse, thresholds, cfg, rng);
    CHECK(result.loss.total == doctest::Approx(0.0));
    for (const double g : result.grad) CHECK(std::fabs(g) < 1e-10);
}

TEST_CASE("physics gradient scales linearly in lambda") {
    GradCheckFixture fx(77);
    Architecture arch = small_arch(BackboneKind::linear, 4);
    Model model = make_model(arch, 5);
    std::vector<const WindowSample*> batch;
    for (const auto& w : fx.windows) batch.push_back(&w);

    auto grad_at = [&](double lambda) {
        TrainConfig cfg;
        cfg.lambda = lambda;
        cfg.pairs_per_step = 6;
        RngStream rng(99);
        return gradient(model, batch, fx.norm, fx.species, fx.morse, fx.thresholds, cfg, rng).grad;
    };
    const auto g0 = grad_at(0.0); // pure mse gradient
    const auto g1 = grad_at(2e-3);
    const auto g2 = grad_at(4e-3);
    for (std::size_t k = 0; k < g0.size(); ++k) {
        const double d1 = g1[k] - g0[k];
        const double d2 = g2[k] - g0[k];
        CHECK(std::fabs(d2 - 2.0 * d1) <= 1e-9 * std::max(1.0, std::fabs(d2)));
    }
}

TEST_CASE("clip_global_norm caps the norm and reports the original") {
    std::vector<double> v = {3.0, 4.0};
    const double before = clip_global_norm(v, 1.0);
    CHECK(before == doctest::Approx(5.0));
    CHECK(std::sqrt(v[0] * v[0] + v[1] * v[1]) <= 1.0 + 1e-9);
    std::vector<double> small = {0.3, 0.4};
    clip_global_norm(small, 1.0);
    CHECK(small[0] == doctest::Approx(0.3));
}

TEST_CASE("training drives a trivially fittable problem to zero") {
    // random features, identically-zero targets
    RngStream rng(33);
    std::vector<WindowSample> windows;
    for (int w = 0; w < 48; ++w) {
        WindowSample s;
        s.features = Mat(3, 12);
        for (double& v : s.features.data) v = rng.normal();
        s.targets = Mat(2, 6);
        s.base_positions = {{0, 0, 0}, {2, 0, 0}};
        windows.push_back(std::move(s));
    }
    const auto norm = Normalizer::identity(2);

    MorseTable morse;
    morse.set("A", "A", {1.0, 1.5, 2.0, -1.0});
    ThresholdTable thresholds;
    thresholds.set("A-A", 1.0);

    Architecture arch = small_arch(BackboneKind::linear, 2);
    TrainConfig cfg;
    cfg.lambda = 0.0;
    cfg.max_epochs = 500;
    cfg.patience = 500;
    cfg.seed = 3;
    const std::vector<std::string> species{"A", "A"};
    const auto result = train(make_model(arch, 11), windows, windows, norm, species, morse,
                              thresholds, cfg);
    CHECK(result.log.best_valid_total < 1e-6);
    // output norm of the returned model on a window is ~0
    const Mat pred = forward(result.model, windows[0].features);
    double out_norm = 0.0;
    for (const double v : pred.data) out_norm += v * v;
    CHECK(std::sqrt(out_norm) < 1e-2);
}

namespace {

// 6x6 rotation from chained Givens rotations: spectral radius exactly 1, so
// the displacement recurrence neither decays nor blows up
std::vector<double> rotation6() {
    std::vector<double> q(36, 0.0);
    for (int i = 0; i < 6; ++i) q[i * 6 + i] = 1.0;
    const int pairs[6][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}};
    const double angles[6] = {0.4, 0.8, 1.2, 0.5, 0.9, 0.3};
    for (int g = 0; g < 6; ++g) {
        const int a = pairs[g][0], b = pairs[g][1];
        const double c = std::cos(angles[g]), s = std::sin(angles[g]);
        for (int col = 0; col < 6; ++col) {
            const double ra = q[a * 6 + col], rb = q[b * 6 + col];
            q[a * 6 + col] = c * ra - s * rb;
            q[b * 6 + col] = s * ra + c * rb;
        }
    }
    return q;
}

Trajectory orbit_trajectory(const std::vector<double>& q, RngStream& rng, int frames_n) {
    std::vector<double> delta(6);
    for (double& v : delta) v = rng.normal(0.0, 0.05);
    std::vector<Frame> frames;
    Frame f{{{rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 4)},
             {rng.uniform(4, 8), rng.uniform(4, 8), rng.uniform(4, 8)}},
            0};
    frames.push_back(f);
    for (int t = 1; t < frames_n; ++t) {
        std::vector<double> next(6, 0.0);
        for (std::size_t r = 0; r < 6; ++r) {
            for (std::size_t c = 0; c < 6; ++c) next[r] += q[r * 6 + c] * delta[c];
        }
        delta = next;
        Frame nf = frames.back();
        nf.step_index = t;
        for (std::size_t i = 0; i < 2; ++i) {
            nf.positions[i].x += delta[3 * i + 0];
            nf.positions[i].y += delta[3 * i + 1];
            nf.positions[i].z += delta[3 * i + 2];
        }
        frames.push_back(nf);
    }
    return Trajectory({"A", "A"}, frames, 1.0);
}

} // namespace

TEST_CASE("training fits synthetic linear dynamics to high accuracy") {
    // displacements follow a fixed linear recurrence delta_{t+1} = A delta_t;
    // many short trajectories with random phases make the regression
    // well-posed
    const auto q = rotation6();
    RngStream rng(17);
    std::vector<WindowSample> train_w, valid_w;
    for (int k = 0; k < 80; ++k) {
        for (auto& w : make_windows(orbit_trajectory(q, rng, 12), WindowSpec{2, 2, 1})) {
            train_w.push_back(std::move(w));
        }
    }
    for (int k = 0; k < 20; ++k) {
        for (auto& w : make_windows(orbit_trajectory(q, rng, 12), WindowSpec{2, 2, 1})) {
            valid_w.push_back(std::move(w));
        }
    }
    const auto norm = Normalizer::fit(train_w);

    MorseTable morse;
    morse.set("A", "A", {1.0, 1.5, 2.0, -1.0});
    ThresholdTable thresholds;
    thresholds.set("A-A", 100.0);

    Architecture arch;
    arch.kind = BackboneKind::linear;
    arch.history = 2;
    arch.horizon = 2;
    arch.n_atoms = 2;

    TrainConfig cfg;
    cfg.lambda = 0.0;
    cfg.max_epochs = 300;
    cfg.patience = 300;
    cfg.learning_rate = 0.02;
    cfg.seed = 4;
    const std::vector<std::string> species{"A", "A"};
    const auto result = train(make_model(arch, 21), train_w, valid_w, norm, species, morse,
                              thresholds, cfg);
    CHECK(result.log.best_valid_total < 1e-6);
}

TEST_CASE("training is deterministic and early stopping returns the best model") {
    const auto traj = seeded_trajectory(4, 60, 1001, 6.0, 0.1);
    const auto windows = make_windows(traj, WindowSpec{3, 2, 1});
    const auto train_w = std::vector<WindowSample>(windows.begin(), windows.begin() + 40);
    const auto valid_w = std::vector<WindowSample>(windows.begin() + 40, windows.end());
    const auto norm = Normalizer::fit(train_w);
    const auto morse = test_morse();
    const auto thresholds = compute_thresholds(traj, morse, ThresholdGranularity::per_species_pair);

    Architecture arch = small_arch(BackboneKind::mlp, 4);
    TrainConfig cfg;
    cfg.lambda = 1e-3;
    cfg.pairs_per_step = 6;
    cfg.max_epochs = 6;
    cfg.patience = 3;
    cfg.seed = 7;

    const auto run1 =
        train(make_model(arch, 50), train_w, valid_w, norm, traj.species(), morse, thresholds, cfg);
    const auto run2 =
        train(make_model(arch, 50), train_w, valid_w, norm, traj.species(), morse, thresholds, cfg);

    REQUIRE(run1.log.epochs.size() == run2.log.epochs.size());
    for (std::size_t e = 0; e < run1.log.epochs.size(); ++e) {
        CHECK(run1.log.epochs[e].train_loss.total == run2.log.epochs[e].train_loss.total);
        CHECK(run1.log.epochs[e].valid_loss.total == run2.log.epochs[e].valid_loss.total);
    }
    CHECK(run1.model.params == run2.model.params);

    // the returned model is at least as good as the final epoch's state
    CHECK(run1.log.best_valid_total <= run1.log.epochs.back().valid_loss.total);
    CHECK(run1.log.best_epoch >= 0);
}

TEST_CASE("training rejects empty datasets") {
    const auto norm = Normalizer::identity(2);
    MorseTable morse;
    morse.set("A", "A", {1, 1, 1, 0});
    ThresholdTable thresholds;
    thresholds.set("A-A", 1.0);
    Architecture arch = small_arch(BackboneKind::linear, 2);
    TrainConfig cfg;
    CHECK_THROWS_AS(train(make_model(arch, 1), {}, {}, norm, {"A", "A"}, morse, thresholds, cfg),
                    EmptyDataset);
}
