#include <doctest.h>

#include <cmath>

#include "atomcast/rng.hpp"
#include "atomcast/simgen.hpp"

using namespace atomcast;

namespace {

MorseTable single_species_table(double depth = 0.5, double steep = 1.6, double eq = 2.4) {
    // offset -depth puts the dissociation limit at zero, so pairs crossing
    // the cutoff do not jump the recorded potential
    MorseTable t;
    t.set("A", "A", {depth, steep, eq, -depth});
    return t;
}

SimConfig base_config() {
    SimConfig c;
    c.n_atoms = 8;
    c.species_counts = {{"A", 8}};
    c.box_side = 7.0;
    c.temperature_K = 300.0;
    c.n_steps = 50;
    c.dt_fs = 0.5;
    c.seed = 99;
    c.morse = single_species_table();
    c.cutoff = 6.5;
    return c;
}

} // namespace

TEST_CASE("a dimer at equilibrium stays put without a thermostat") {
    // two atoms separated by exactly eq_dist, zero velocity: force is zero
    const MorseParams p{0.5, 1.6, 2.4, -0.5};
    MorseTable table;
    table.set("A", "A", p);

    // generate() draws Maxwell-Boltzmann velocities, so integrate by hand
    // from the exact stationary state using the library force evaluation
    Frame f{{{2.0, 2.0, 2.0}, {2.0 + p.eq_dist, 2.0, 2.0}}, 0};
    std::vector<std::string> species{"A", "A"};
    std::vector<Vec3> pos = f.positions;
    std::vector<Vec3> vel(2);
    const double dt = 1.0;
    for (int step = 0; step < 100; ++step) {
        auto force = morse_forces(Frame{pos, step}, species, table, 6.5);
        for (std::size_t i = 0; i < 2; ++i) {
            vel[i] += force[i] * (0.5 * dt * units::ev_per_amu_accel);
            pos[i] += vel[i] * dt;
        }
        force = morse_forces(Frame{pos, step}, species, table, 6.5);
        for (std::size_t i = 0; i < 2; ++i) vel[i] += force[i] * (0.5 * dt * units::ev_per_amu_accel);
    }
    CHECK(std::fabs(pos[0].x - f.positions[0].x) < 1e-6);
    CHECK(std::fabs(pos[1].x - f.positions[1].x) < 1e-6);
    CHECK(std::fabs(pos[0].y - f.positions[0].y) < 1e-6);
}

TEST_CASE("generation is deterministic given the seed") {
    auto c = base_config();
    c.thermostat.kind = ThermostatKind::langevin;
    c.thermostat.gamma_per_fs = 0.05;
    const auto a = generate(c);
    const auto b = generate(c);
    REQUIRE(a.n_frames() == b.n_frames());
    for (std::size_t t = 0; t < a.n_frames(); ++t) {
        for (std::size_t i = 0; i < a.n_atoms(); ++i) {
            CHECK(a.position(t, i).x == b.position(t, i).x);
            CHECK(a.position(t, i).y == b.position(t, i).y);
            CHECK(a.position(t, i).z == b.position(t, i).z);
        }
    }
    c.seed += 1;
    const auto other = generate(c);
    bool any_different = false;
    for (std::size_t i = 0; i < a.n_atoms() && !any_different; ++i) {
        any_different = other.position(0, i).x != a.position(0, i).x;
    }
    CHECK(any_different);
}

TEST_CASE("pair forces sum to zero (third law)") {
    auto c = base_config();
    c.n_steps = 20;
    const auto traj = generate(c);
    for (std::size_t t = 0; t < traj.n_frames(); ++t) {
        const auto forces = morse_forces(traj.frame(t), traj.species(), c.morse, c.cutoff);
        Vec3 total{};
        for (const auto& f : forces) total += f;
        CHECK(std::fabs(total.x) < 1e-9);
        CHECK(std::fabs(total.y) < 1e-9);
        CHECK(std::fabs(total.z) < 1e-9);
    }
}

TEST_CASE("analytic force matches finite differences of the energy") {
    const MorseParams p{0.5, 1.6, 2.4, -0.1};
    RngStream rng(17);
    for (int k = 0; k < 20; ++k) {
        const double d = rng.uniform(1.2, 5.5);
        const double h = 1e-6;
        const double fd = (morse_energy(p, d + h) - morse_energy(p, d - h)) / (2 * h);
        const double an = morse_energy_derivative(p, d);
        CHECK(std::fabs(an - fd) / std::max(std::fabs(fd), 1e-12) < 1e-6);
    }
}

TEST_CASE("microcanonical run conserves energy within 1% of the well depth") {
    auto c = base_config();
    c.n_steps = 2000;
    c.dt_fs = 0.5;
    c.temperature_K = 150.0;
    c.thermostat.kind = ThermostatKind::none;
    // free cluster in vacuum: wall bounces and cutoff crossings would both
    // show up as spurious energy jumps
    c.reflective_walls = false;
    c.cutoff = 12.0;
    c.mass_amu = 12.0; // slower vibrations keep the integrator error small at dt = 0.5
    const auto [traj, energies] = generate_with_energies(c);
    REQUIRE(energies.size() == traj.n_frames());
    const double depth = 0.5; // well depth of the test table
    double e_min = energies.front().total(), e_max = e_min;
    for (const auto& e : energies) {
        e_min = std::min(e_min, e.total());
        e_max = std::max(e_max, e.total());
    }
    CHECK(e_max - e_min < 0.01 * depth * static_cast<double>(c.n_atoms));
}

TEST_CASE("velocity rescaling keeps kinetic temperature near the target") {
    auto c = base_config();
    c.n_atoms = 64;
    c.species_counts = {{"A", 64}};
    c.box_side = 11.0;
    c.n_steps = 600;
    c.dt_fs = 1.0;
    c.temperature_K = 500.0;
    c.thermostat.kind = ThermostatKind::velocity_rescale;
    c.thermostat.rescale_interval = 2;
    const auto [traj, energies] = generate_with_energies(c);

    // Maxwell-Boltzmann init should land near the target already
    const double t0 = 2.0 * energies[0].kinetic_ev /
                      (3.0 * static_cast<double>(c.n_atoms) * units::k_boltzmann_ev);
    CHECK(t0 == doctest::Approx(c.temperature_K).epsilon(0.25));

    // burn-in, then check instantaneous kinetic temperature
    for (std::size_t t = 200; t < energies.size(); ++t) {
        const double t_kin = 2.0 * energies[t].kinetic_ev /
                             (3.0 * static_cast<double>(c.n_atoms) * units::k_boltzmann_ev);
        CHECK(t_kin > 0.85 * c.temperature_K);
        CHECK(t_kin < 1.15 * c.temperature_K);
    }
}

TEST_CASE("free atoms under langevin diffuse with linearly growing MSD") {
    // atoms placed far outside the cutoff behave as free Brownian particles
    SimConfig c;
    c.n_atoms = 32;
    c.species_counts = {{"A", 32}};
    c.box_side = 4000.0;
    c.temperature_K = 300.0;
    c.n_steps = 6000;
    c.dt_fs = 1.0;
    c.seed = 31;
    c.morse = single_species_table();
    c.cutoff = 5.0;
    c.reflective_walls = false;
    c.thermostat.kind = ThermostatKind::langevin;
    c.thermostat.gamma_per_fs = 0.2;

    const auto traj = generate(c);
    // Langevin theory: MSD(t) -> 6 (kT/(m gamma)) t for t >> 1/gamma.
    // Slope fitted over the diffusive regime must land within +-25%.
    const double kT = units::k_boltzmann_ev * c.temperature_K;
    const double d_theory = kT * units::ev_per_amu_accel / (c.mass_amu * c.thermostat.gamma_per_fs);

    // multi-origin MSD, brute force
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n_lags = 0;
    for (std::size_t lag = 500; lag <= 3000; lag += 100) {
        double msd = 0.0;
        std::size_t count = 0;
        for (std::size_t origin = 0; origin + lag < traj.n_frames(); origin += 200) {
            for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
                msd += (traj.position(origin + lag, i) - traj.position(origin, i)).norm2();
                ++count;
            }
        }
        msd /= static_cast<double>(count);
        const double t = static_cast<double>(lag) * c.dt_fs;
        sx += t;
        sy += msd;
        sxx += t * t;
        sxy += t * msd;
        ++n_lags;
    }
    const double slope =
        (static_cast<double>(n_lags) * sxy - sx * sy) / (static_cast<double>(n_lags) * sxx - sx * sx);
    CHECK(slope > 0.0);
    CHECK(slope == doctest::Approx(6.0 * d_theory).epsilon(0.25));
}

TEST_CASE("config validation") {
    auto c = base_config();
    c.n_atoms = 7; // does not match species_counts
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = base_config();
    c.cutoff = 1.0; // below eq distance
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = base_config();
    c.n_steps = 1;
    CHECK_THROWS_AS(generate(c), InvalidConfig);
}

TEST_CASE("split_dataset produces contiguous ordered segments") {
    auto c = base_config();
    c.n_steps = 1000;
    c.thermostat.kind = ThermostatKind::langevin;
    const auto traj = generate(c);
    const auto [train, valid, test] = split_dataset(traj, 0.8, 0.1);
    CHECK(train.n_frames() == 800);
    CHECK(valid.n_frames() == 100);
    CHECK(test.n_frames() == 100);
    CHECK(train.frame(799).step_index + 1 == valid.frame(0).step_index);
    CHECK(valid.frame(99).step_index + 1 == test.frame(0).step_index);
    // segment contents equal the original
    CHECK(valid.position(0, 0).x == traj.position(800, 0).x);
}

TEST_CASE("split_dataset reproduces published-style segment sizes") {
    // 7819 frames split as 5967/852/1000
    std::vector<std::string> species{"A", "A"};
    std::vector<Frame> frames;
    for (int t = 0; t < 7819; ++t) {
        frames.push_back(Frame{{{0.0, 0.0, 0.0}, {2.0 + 0.0001 * t, 0.0, 0.0}}, t});
    }
    const Trajectory traj(species, frames, 1.0);
    const auto [train, valid, test] = split_dataset(traj, 5967.0 / 7819.0, 852.0 / 7819.0);
    CHECK(train.n_frames() == 5967);
    CHECK(valid.n_frames() == 852);
    CHECK(test.n_frames() == 1000);
}

TEST_CASE("split_dataset guards segment lengths") {
    std::vector<std::string> species{"A", "A"};
    std::vector<Frame> frames;
    for (int t = 0; t < 100; ++t) frames.push_back(Frame{{{0, 0, 0}, {2, 0, 0}}, t});
    const Trajectory traj(species, frames, 1.0);
    // H=64, L=16 needs 81 frames per segment
    CHECK_THROWS_AS(split_dataset(traj, 0.8, 0.1, 64 + 16 + 1), SegmentTooShort);
    CHECK_THROWS_AS(split_dataset(traj, 0.5, 0.5), InvalidConfig);
    CHECK_THROWS_AS(split_dataset(traj, 0.98, 0.01, 2), SegmentTooShort);
}
