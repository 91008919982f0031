#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "atomcast/rng.hpp"
#include "atomcast/traj_io.hpp"
#include "atomcast/trajectory.hpp"

using namespace atomcast;

namespace {

Trajectory random_walk_trajectory(std::size_t n_atoms, std::size_t n_frames, std::uint64_t seed,
                                  double step_sigma = 0.1) {
    RngStream rng(seed);
    std::vector<std::string> species;
    for (std::size_t i = 0; i < n_atoms; ++i) species.push_back(i % 2 == 0 ? "A" : "B");
    std::vector<Frame> frames;
    Frame f;
    f.step_index = 0;
    for (std::size_t i = 0; i < n_atoms; ++i) {
        f.positions.push_back({rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)});
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

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("compute_displacements matches the definition") {
    std::vector<Frame> frames;
    frames.push_back(Frame{{{0, 0, 0}, {5, 5, 5}}, 0});
    frames.push_back(Frame{{{1, 2, 3}, {5, 5, 5}}, 1});
    const Trajectory traj({"A", "A"}, frames, 1.0);
    const auto d = compute_displacements(traj);
    REQUIRE(d.n_steps() == 1);
    CHECK(d.deltas[0][0].x == doctest::Approx(1.0));
    CHECK(d.deltas[0][0].y == doctest::Approx(2.0));
    CHECK(d.deltas[0][0].z == doctest::Approx(3.0));
    CHECK(d.deltas[0][1].norm() == doctest::Approx(0.0));
}

TEST_CASE("constant trajectory gives zero displacements") {
    std::vector<Frame> frames;
    for (int t = 0; t < 4; ++t) frames.push_back(Frame{{{1, 2, 3}, {4, 5, 6}}, t});
    const auto d = compute_displacements(Trajectory({"A", "B"}, frames, 1.0));
    REQUIRE(d.n_steps() == 3);
    for (const auto& frame : d.deltas) {
        for (const auto& v : frame) CHECK(v.norm() == 0.0);
    }
}

TEST_CASE("displacements equal successive differences (brute-force oracle)") {
    const auto traj = random_walk_trajectory(2, 3, 77);
    const auto d = compute_displacements(traj);
    REQUIRE(d.n_steps() == traj.n_frames() - 1);
    for (std::size_t t = 0; t + 1 < traj.n_frames(); ++t) {
        for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
            // independent subtraction, componentwise
            CHECK(d.deltas[t][i].x == traj.position(t + 1, i).x - traj.position(t, i).x);
            CHECK(d.deltas[t][i].y == traj.position(t + 1, i).y - traj.position(t, i).y);
            CHECK(d.deltas[t][i].z == traj.position(t + 1, i).z - traj.position(t, i).z);
        }
    }
}

TEST_CASE("compute_displacements rejects single-frame trajectories") {
    const Trajectory traj({"A", "B"}, {Frame{{{0, 0, 0}, {1, 1, 1}}, 0}}, 1.0);
    CHECK_THROWS_AS(compute_displacements(traj), TrajectoryTooShort);
}

TEST_CASE("reconstruct_positions is a cumulative sum") {
    Frame initial{{{0, 0, 0}, {1, 1, 1}}, 0};
    DisplacementSeries d;
    d.n_atoms = 2;
    d.deltas = {{{1, 0, 0}, {0, 0, 0}}, {{0, 1, 0}, {0, 0, 0}}};
    const auto traj = reconstruct_positions(initial, d, {"A", "A"});
    REQUIRE(traj.n_frames() == 3);
    CHECK(traj.position(0, 0).x == 0.0);
    CHECK(traj.position(1, 0).x == 1.0);
    CHECK(traj.position(2, 0).x == 1.0);
    CHECK(traj.position(2, 0).y == 1.0);
}

TEST_CASE("empty displacement series reconstructs the initial frame only") {
    Frame initial{{{2, 3, 4}, {5, 6, 7}}, 0};
    const auto traj = reconstruct_positions(initial, DisplacementSeries{}, {"A", "B"});
    REQUIRE(traj.n_frames() == 1);
    CHECK(traj.position(0, 1).z == 7.0);
}

TEST_CASE("reconstruct rejects mismatched atom counts") {
    Frame initial{{{0, 0, 0}, {1, 1, 1}}, 0};
    DisplacementSeries d;
    d.n_atoms = 3;
    d.deltas = {{{1, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
    CHECK_THROWS_AS(reconstruct_positions(initial, d, {"A", "A"}), ShapeMismatch);
}

TEST_CASE("displacement/reconstruction round-trip on seeded random trajectories") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        const auto traj = random_walk_trajectory(4, 20, seed);
        const auto d = compute_displacements(traj);
        const auto rebuilt = reconstruct_positions(traj.frame(0), d, traj.species(), traj.dt_fs());
        REQUIRE(rebuilt.n_frames() == traj.n_frames());
        for (std::size_t t = 0; t < traj.n_frames(); ++t) {
            for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
                CHECK(std::fabs(rebuilt.position(t, i).x - traj.position(t, i).x) < 1e-10);
                CHECK(std::fabs(rebuilt.position(t, i).y - traj.position(t, i).y) < 1e-10);
                CHECK(std::fabs(rebuilt.position(t, i).z - traj.position(t, i).z) < 1e-10);
            }
        }
    }
}

TEST_CASE("trajectory constructor enforces invariants") {
    CHECK_THROWS_AS(Trajectory({"A"}, {Frame{{{0, 0, 0}}, 0}}, 1.0), ShapeMismatch);
    CHECK_THROWS_AS(Trajectory({"A", "B"}, {Frame{{{0, 0, 0}, {1, 1, 1}}, 0}}, 0.0), InvalidConfig);
    // broken stride
    std::vector<Frame> frames = {Frame{{{0, 0, 0}, {1, 1, 1}}, 0}, Frame{{{0, 0, 0}, {1, 1, 1}}, 2}};
    CHECK_THROWS_AS(Trajectory({"A", "B"}, frames, 1.0), ShapeMismatch);
    // NaN coordinate
    frames = {Frame{{{0, 0, 0}, {std::nan(""), 1, 1}}, 0}};
    CHECK_THROWS_AS(Trajectory({"A", "B"}, frames, 1.0), ShapeMismatch);
}

TEST_CASE("xyz file round-trip preserves the trajectory") {
    const auto traj = random_walk_trajectory(3, 5, 11);
    const auto path = temp_file("atomcast_test_roundtrip.xyz");
    write_trajectory(traj, path);
    const auto back = read_trajectory(path);
    REQUIRE(back.n_frames() == traj.n_frames());
    REQUIRE(back.species() == traj.species());
    CHECK(back.dt_fs() == doctest::Approx(traj.dt_fs()));
    for (std::size_t t = 0; t < traj.n_frames(); ++t) {
        CHECK(back.frame(t).step_index == traj.frame(t).step_index);
        for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
            CHECK(std::fabs(back.position(t, i).x - traj.position(t, i).x) < 1e-8);
            CHECK(std::fabs(back.position(t, i).y - traj.position(t, i).y) < 1e-8);
            CHECK(std::fabs(back.position(t, i).z - traj.position(t, i).z) < 1e-8);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("csv file round-trip preserves coordinates and species order") {
    const auto traj = random_walk_trajectory(3, 5, 12);
    const auto path = temp_file("atomcast_test_roundtrip.csv");
    write_trajectory(traj, path);
    const auto back = read_trajectory(path);
    REQUIRE(back.n_frames() == traj.n_frames());
    REQUIRE(back.species() == traj.species());
    for (std::size_t t = 0; t < traj.n_frames(); ++t) {
        for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
            CHECK(std::fabs(back.position(t, i).x - traj.position(t, i).x) < 1e-8);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("hand-written extended-xyz parses step indices and dt") {
    std::istringstream in(
        "2\n"
        "step=7 dt_fs=0.5 material=test\n"
        "Li 0.0 0.0 0.0\n"
        "S 1.0 2.0 3.0\n"
        "2\n"
        "step=8\n"
        "Li 0.1 0.0 0.0\n"
        "S 1.0 2.0 3.5\n");
    const auto traj = read_trajectory_xyz(in, "golden");
    REQUIRE(traj.n_frames() == 2);
    CHECK(traj.frame(0).step_index == 7);
    CHECK(traj.frame(1).step_index == 8);
    CHECK(traj.dt_fs() == doctest::Approx(0.5));
    CHECK(traj.species()[0] == "Li");
    CHECK(traj.position(1, 1).z == doctest::Approx(3.5));
}

TEST_CASE("csv reader names the missing column") {
    std::istringstream in("step,atom_id,species,x,y\n0,0,A,0.0,0.0\n");
    try {
        read_trajectory_csv(in, "broken.csv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("'z'") != std::string::npos);
    }
}

TEST_CASE("xyz reader reports the offending line") {
    std::istringstream in(
        "2\n"
        "step=0\n"
        "A 0.0 0.0 0.0\n"
        "B 1.0 bad 0.0\n");
    try {
        read_trajectory_xyz(in, "broken.xyz");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":4:") != std::string::npos);
    }
}

TEST_CASE("xyz reader rejects inconsistent atom counts") {
    std::istringstream in(
        "2\n"
        "step=0\n"
        "A 0 0 0\n"
        "B 1 1 1\n"
        "3\n"
        "step=1\n"
        "A 0 0 0\n"
        "B 1 1 1\n"
        "B 2 2 2\n");
    CHECK_THROWS_AS(read_trajectory_xyz(in, "bad_count.xyz"), InconsistentAtomCount);
}
