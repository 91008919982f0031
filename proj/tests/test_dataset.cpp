#include <doctest.h>

#include <cmath>

#include "atomcast/dataset.hpp"
#include "atomcast/rng.hpp"

using namespace atomcast;

namespace {

Trajectory seeded_trajectory(std::size_t n_atoms, std::size_t n_frames, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<std::string> species;
    for (std::size_t i = 0; i < n_atoms; ++i) species.push_back("A");
    std::vector<Frame> frames;
    for (std::size_t t = 0; t < n_frames; ++t) {
        Frame f;
        f.step_index = static_cast<long>(t);
        for (std::size_t i = 0; i < n_atoms; ++i) {
            f.positions.push_back({rng.uniform(0.0, 8.0), rng.uniform(0.0, 8.0), rng.uniform(0.0, 8.0)});
        }
        frames.push_back(f);
    }
    return Trajectory(species, frames, 1.0);
}

} // namespace

TEST_CASE("window count follows the formula") {
    const auto traj = seeded_trajectory(2, 10, 1);
    const auto windows = make_windows(traj, WindowSpec{4, 2, 1});
    CHECK(windows.size() == 5);
}

TEST_CASE("window count property over a (T, H, L, stride) sweep") {
    for (const std::size_t t_total : {12, 17, 25, 40}) {
        const auto traj = seeded_trajectory(2, t_total, t_total);
        for (const int h : {1, 3, 5}) {
            for (const int l : {1, 2, 4}) {
                for (const int stride : {1, 2, 3}) {
                    if (t_total < static_cast<std::size_t>(h + l + 1)) continue;
                    const auto windows = make_windows(traj, WindowSpec{h, l, stride});
                    const std::size_t expected =
                        (t_total - static_cast<std::size_t>(h) - static_cast<std::size_t>(l)) /
                            static_cast<std::size_t>(stride) +
                        1;
                    CHECK(windows.size() == expected);
                }
            }
        }
    }
}

TEST_CASE("windows match an independent slicing oracle") {
    const auto traj = seeded_trajectory(2, 14, 7);
    const WindowSpec spec{3, 2, 1};
    const auto windows = make_windows(traj, spec);
    const std::size_t n = traj.n_atoms();

    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& sample = windows[w];
        CHECK(sample.start_frame == w);
        REQUIRE(sample.features.rows == 3);
        REQUIRE(sample.features.cols == 6 * n);
        REQUIRE(sample.targets.rows == 2);
        REQUIRE(sample.targets.cols == 3 * n);

        // oracle: slice positions and difference them directly
        for (std::size_t row = 0; row < 3; ++row) {
            const std::size_t g = w + row;
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(sample.features.at(row, 6 * i + 0) == traj.position(g, i).x);
                CHECK(sample.features.at(row, 6 * i + 1) == traj.position(g, i).y);
                CHECK(sample.features.at(row, 6 * i + 2) == traj.position(g, i).z);
                const double dx = g == 0 ? 0.0 : traj.position(g, i).x - traj.position(g - 1, i).x;
                const double dy = g == 0 ? 0.0 : traj.position(g, i).y - traj.position(g - 1, i).y;
                const double dz = g == 0 ? 0.0 : traj.position(g, i).z - traj.position(g - 1, i).z;
                CHECK(sample.features.at(row, 6 * i + 3) == dx);
                CHECK(sample.features.at(row, 6 * i + 4) == dy);
                CHECK(sample.features.at(row, 6 * i + 5) == dz);
            }
        }
        const std::size_t anchor = w + 2; // last history frame
        for (std::size_t row = 0; row < 2; ++row) {
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(sample.targets.at(row, 3 * i + 0) ==
                      traj.position(anchor + row + 1, i).x - traj.position(anchor + row, i).x);
                CHECK(sample.targets.at(row, 3 * i + 1) ==
                      traj.position(anchor + row + 1, i).y - traj.position(anchor + row, i).y);
                CHECK(sample.targets.at(row, 3 * i + 2) ==
                      traj.position(anchor + row + 1, i).z - traj.position(anchor + row, i).z);
            }
        }
        // anchor positions are carried raw
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(sample.base_positions[i].x == traj.position(anchor, i).x);
        }
    }
}

TEST_CASE("only the window starting at the first frame has a zero lag block") {
    const auto traj = seeded_trajectory(2, 12, 3);
    const auto windows = make_windows(traj, WindowSpec{4, 2, 1});
    auto lag_block_zero = [&](const WindowSample& s) {
        for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
            for (int k = 3; k < 6; ++k) {
                if (s.features.at(0, 6 * i + static_cast<std::size_t>(k)) != 0.0) return false;
            }
        }
        return true;
    };
    CHECK(lag_block_zero(windows[0]));
    for (std::size_t w = 1; w < windows.size(); ++w) CHECK_FALSE(lag_block_zero(windows[w]));
}

TEST_CASE("too-short trajectories are rejected") {
    const auto traj = seeded_trajectory(2, 6, 5);
    CHECK_THROWS_AS(make_windows(traj, WindowSpec{4, 2, 1}), TrajectoryTooShort);
}

TEST_CASE("normalizer round-trips targets") {
    const auto traj = seeded_trajectory(3, 20, 11);
    const auto windows = make_windows(traj, WindowSpec{4, 3, 1});
    const auto norm = Normalizer::fit(windows);

    const auto& sample = windows[2];
    const Mat normalized = norm.apply_targets(sample.targets);
    const Mat back = norm.invert_targets(normalized);
    for (std::size_t k = 0; k < back.size(); ++k) {
        CHECK(std::fabs(back.data[k] - sample.targets.data[k]) < 1e-10);
    }
}

TEST_CASE("constant columns hit the sigma floor and normalize to zero") {
    // an immobile atom produces constant position columns and zero deltas
    std::vector<Frame> frames;
    for (int t = 0; t < 12; ++t) frames.push_back(Frame{{{1, 2, 3}, {4, 5, 6}}, t});
    const Trajectory traj({"A", "A"}, frames, 1.0);
    const auto windows = make_windows(traj, WindowSpec{3, 2, 1});
    const auto norm = Normalizer::fit(windows);
    for (std::size_t c = 0; c < norm.feature_sigma().size(); ++c) {
        CHECK(norm.feature_sigma()[c] == doctest::Approx(1e-8));
    }
    const Mat normalized = norm.apply_features(windows[0].features);
    for (std::size_t k = 0; k < normalized.size(); ++k) CHECK(normalized.data[k] == 0.0);
}

TEST_CASE("normalized seeded data has near-standard statistics") {
    // wide random-walk data: post-normalization column means ~0, sigma ~1
    RngStream rng(77);
    std::vector<Frame> frames;
    Frame f{{{0, 0, 0}, {1, 1, 1}}, 0};
    frames.push_back(f);
    for (int t = 1; t < 1500; ++t) {
        Frame next = frames.back();
        next.step_index = t;
        for (auto& p : next.positions) {
            p.x += rng.normal(0.0, 0.3);
            p.y += rng.normal(0.0, 0.3);
            p.z += rng.normal(0.0, 0.3);
        }
        frames.push_back(next);
    }
    const Trajectory traj({"A", "A"}, frames, 1.0);
    const auto windows = make_windows(traj, WindowSpec{2, 1, 7});
    const auto norm = Normalizer::fit(windows);

    const std::size_t cols = norm.feature_mean().size();
    std::vector<double> mean(cols, 0.0), var(cols, 0.0);
    std::size_t rows = 0;
    for (const auto& w : windows) {
        const Mat x = norm.apply_features(w.features);
        for (std::size_t r = 0; r < x.rows; ++r) {
            ++rows;
            for (std::size_t c = 0; c < cols; ++c) mean[c] += x.at(r, c);
        }
    }
    for (double& m : mean) m /= static_cast<double>(rows);
    for (const auto& w : windows) {
        const Mat x = norm.apply_features(w.features);
        for (std::size_t r = 0; r < x.rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                var[c] += (x.at(r, c) - mean[c]) * (x.at(r, c) - mean[c]);
            }
        }
    }
    for (std::size_t c = 0; c < cols; ++c) {
        CHECK(std::fabs(mean[c]) < 1e-2);
        CHECK(std::sqrt(var[c] / static_cast<double>(rows)) == doctest::Approx(1.0).epsilon(1e-2));
    }
}

TEST_CASE("normalizer statistics ignore non-training segments") {
    const auto traj = seeded_trajectory(2, 30, 13);
    const auto train = traj.slice(0, 20);
    const auto windows = make_windows(train, WindowSpec{4, 2, 1});
    const auto norm_a = Normalizer::fit(windows);

    // perturb the would-be test segment; the fitted statistics cannot change
    auto frames = traj.frames();
    for (std::size_t t = 20; t < 30; ++t) {
        for (auto& p : frames[t].positions) p.x += 100.0;
    }
    const Trajectory perturbed(traj.species(), frames, traj.dt_fs());
    const auto norm_b = Normalizer::fit(make_windows(perturbed.slice(0, 20), WindowSpec{4, 2, 1}));
    CHECK(norm_a.feature_mean() == norm_b.feature_mean());
    CHECK(norm_a.feature_sigma() == norm_b.feature_sigma());
}

TEST_CASE("empty window set is rejected") {
    CHECK_THROWS_AS(Normalizer::fit({}), EmptyInput);
}
