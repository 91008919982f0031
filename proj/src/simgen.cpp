#include "atomcast/simgen.hpp"

#include <algorithm>
#include <cmath>

#include "atomcast/rng.hpp"

namespace atomcast {

namespace {

void validate(const SimConfig& c) {
    int total = 0;
    for (const auto& [sp, count] : c.species_counts) {
        if (count <= 0) throw InvalidConfig("species count for '" + sp + "' must be positive");
        total += count;
    }
    if (total != c.n_atoms) {
        throw InvalidConfig("n_atoms (" + std::to_string(c.n_atoms) +
                            ") must equal the sum of species_counts (" + std::to_string(total) + ")");
    }
    if (c.n_atoms < 2) throw InvalidConfig("simulation needs at least 2 atoms");
    if (c.n_steps < 2) throw InvalidConfig("n_steps must be >= 2");
    if (!(c.dt_fs > 0.0)) throw InvalidConfig("dt_fs must be positive");
    if (!(c.temperature_K > 0.0)) throw InvalidConfig("temperature_K must be positive");
    if (!(c.box_side > 0.0)) throw InvalidConfig("box_side must be positive");
    if (!(c.mass_amu > 0.0)) throw InvalidConfig("mass_amu must be positive");
    if (!(c.cutoff > c.morse.max_eq_dist())) {
        throw InvalidConfig("cutoff (" + std::to_string(c.cutoff) +
                            ") must exceed every equilibrium distance in the Morse table (max " +
                            std::to_string(c.morse.max_eq_dist()) + ")");
    }
}

std::vector<std::string> expand_species(const SimConfig& c) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(c.n_atoms));
    for (const auto& [sp, count] : c.species_counts) {
        for (int k = 0; k < count; ++k) out.push_back(sp);
    }
    return out;
}

// jittered cubic lattice; re-jitters until no pair sits below 0.5 * min eq distance
std::vector<Vec3> initial_positions(const SimConfig& c, RngStream& rng) {
    const int n = c.n_atoms;
    int cells = 1;
    while (cells * cells * cells < n) ++cells;
    const double spacing = c.box_side / static_cast<double>(cells);
    const double jitter_sigma = 0.05 * c.morse.min_eq_dist();
    const double min_sep = 0.5 * c.morse.min_eq_dist();

    std::vector<Vec3> lattice;
    lattice.reserve(static_cast<std::size_t>(n));
    for (int ix = 0; ix < cells && static_cast<int>(lattice.size()) < n; ++ix) {
        for (int iy = 0; iy < cells && static_cast<int>(lattice.size()) < n; ++iy) {
            for (int iz = 0; iz < cells && static_cast<int>(lattice.size()) < n; ++iz) {
                lattice.push_back({(ix + 0.5) * spacing, (iy + 0.5) * spacing, (iz + 0.5) * spacing});
            }
        }
    }

    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<Vec3> pos = lattice;
        for (Vec3& p : pos) {
            p.x += rng.normal(0.0, jitter_sigma);
            p.y += rng.normal(0.0, jitter_sigma);
            p.z += rng.normal(0.0, jitter_sigma);
        }
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            for (int j = i + 1; j < n && ok; ++j) {
                if ((pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(j)]).norm() < min_sep) {
                    ok = false;
                }
            }
        }
        if (ok) return pos;
    }
    throw InvalidConfig("could not place " + std::to_string(n) + " atoms in a box of side " +
                        std::to_string(c.box_side) + " without overlaps; increase box_side");
}

struct ForceEnergy {
    std::vector<Vec3> force;
    double potential = 0.0;
};

ForceEnergy forces_and_energy(const std::vector<Vec3>& pos, const std::vector<std::string>& species,
                              const MorseTable& morse, double cutoff) {
    const std::size_t n = pos.size();
    ForceEnergy out;
    out.force.assign(n, Vec3{});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec3 rij = pos[i] - pos[j];
            const double d = rij.norm();
            if (d >= cutoff || d <= 0.0) continue;
            const MorseParams& p = morse.lookup(species[i], species[j]);
            out.potential += morse_energy(p, d);
            const double dE_dd = morse_energy_derivative(p, d);
            const Vec3 f = rij * (-dE_dd / d); // force on i
            out.force[i] += f;
            out.force[j] -= f;
        }
    }
    return out;
}

double kinetic_energy_ev(const std::vector<Vec3>& vel, double mass_amu) {
    double v2 = 0.0;
    for (const Vec3& v : vel) v2 += v.norm2();
    return 0.5 * mass_amu * v2 / units::ev_per_amu_accel;
}

double kinetic_temperature_K(const std::vector<Vec3>& vel, double mass_amu) {
    const double ke = kinetic_energy_ev(vel, mass_amu);
    return 2.0 * ke / (3.0 * static_cast<double>(vel.size()) * units::k_boltzmann_ev);
}

void reflect_walls(std::vector<Vec3>& pos, std::vector<Vec3>& vel, double box) {
    for (std::size_t i = 0; i < pos.size(); ++i) {
        auto bounce = [box](double& x, double& v) {
            if (x < 0.0) {
                x = -x;
                v = -v;
            } else if (x > box) {
                x = 2.0 * box - x;
                v = -v;
            }
        };
        bounce(pos[i].x, vel[i].x);
        bounce(pos[i].y, vel[i].y);
        bounce(pos[i].z, vel[i].z);
    }
}

void check_blowup(const std::vector<Vec3>& pos, double potential, int step) {
    if (std::isnan(potential)) {
        throw BlowUp("energy became NaN at step " + std::to_string(step));
    }
    for (const Vec3& p : pos) {
        if (!p.finite() || std::fabs(p.x) > 1e6 || std::fabs(p.y) > 1e6 || std::fabs(p.z) > 1e6) {
            throw BlowUp("position out of bounds at step " + std::to_string(step));
        }
    }
}

} // namespace

std::vector<Vec3> morse_forces(const Frame& frame, const std::vector<std::string>& species,
                               const MorseTable& morse, double cutoff) {
    return forces_and_energy(frame.positions, species, morse, cutoff).force;
}

std::pair<Trajectory, std::vector<SimEnergies>> generate_with_energies(const SimConfig& c) {
    validate(c);
    const auto species = expand_species(c);
    const std::size_t n = static_cast<std::size_t>(c.n_atoms);

    RngStream init_rng(derive_seed(c.seed, "simgen.init"));
    RngStream bath_rng(derive_seed(c.seed, "simgen.bath"));

    std::vector<Vec3> pos = initial_positions(c, init_rng);
    std::vector<Vec3> vel(n);
    const double v_sigma =
        std::sqrt(units::k_boltzmann_ev * c.temperature_K * units::ev_per_amu_accel / c.mass_amu);
    for (Vec3& v : vel) {
        v.x = init_rng.normal(0.0, v_sigma);
        v.y = init_rng.normal(0.0, v_sigma);
        v.z = init_rng.normal(0.0, v_sigma);
    }

    const double dt = c.dt_fs;
    const double accel_scale = units::ev_per_amu_accel / c.mass_amu;

    std::vector<Frame> frames;
    std::vector<SimEnergies> energies;
    frames.reserve(static_cast<std::size_t>(c.n_steps));
    energies.reserve(static_cast<std::size_t>(c.n_steps));

    ForceEnergy fe = forces_and_energy(pos, species, c.morse, c.cutoff);
    auto record = [&](int step) {
        frames.push_back(Frame{pos, step});
        energies.push_back(SimEnergies{fe.potential, kinetic_energy_ev(vel, c.mass_amu)});
    };
    record(0);

    // langevin OU coefficients (BAOAB splitting)
    const double c1 = std::exp(-c.thermostat.gamma_per_fs * dt);
    const double c2 = v_sigma * std::sqrt(std::max(0.0, 1.0 - c1 * c1));

    for (int step = 1; step < c.n_steps; ++step) {
        if (c.thermostat.kind == ThermostatKind::langevin) {
            for (std::size_t i = 0; i < n; ++i) vel[i] += fe.force[i] * (0.5 * dt * accel_scale);
            for (std::size_t i = 0; i < n; ++i) pos[i] += vel[i] * (0.5 * dt);
            if (c.reflective_walls) reflect_walls(pos, vel, c.box_side);
            for (std::size_t i = 0; i < n; ++i) {
                vel[i].x = c1 * vel[i].x + c2 * bath_rng.normal();
                vel[i].y = c1 * vel[i].y + c2 * bath_rng.normal();
                vel[i].z = c1 * vel[i].z + c2 * bath_rng.normal();
            }
            for (std::size_t i = 0; i < n; ++i) pos[i] += vel[i] * (0.5 * dt);
            if (c.reflective_walls) reflect_walls(pos, vel, c.box_side);
            fe = forces_and_energy(pos, species, c.morse, c.cutoff);
            for (std::size_t i = 0; i < n; ++i) vel[i] += fe.force[i] * (0.5 * dt * accel_scale);
        } else {
            // plain velocity Verlet
            for (std::size_t i = 0; i < n; ++i) {
                vel[i] += fe.force[i] * (0.5 * dt * accel_scale);
                pos[i] += vel[i] * dt;
            }
            if (c.reflective_walls) reflect_walls(pos, vel, c.box_side);
            fe = forces_and_energy(pos, species, c.morse, c.cutoff);
            for (std::size_t i = 0; i < n; ++i) vel[i] += fe.force[i] * (0.5 * dt * accel_scale);
            if (c.thermostat.kind == ThermostatKind::velocity_rescale &&
                step % std::max(1, c.thermostat.rescale_interval) == 0) {
                const double t_now = kinetic_temperature_K(vel, c.mass_amu);
                if (t_now > 0.0) {
                    const double scale = std::sqrt(c.temperature_K / t_now);
                    for (Vec3& v : vel) v *= scale;
                }
            }
        }
        check_blowup(pos, fe.potential, step);
        record(step);
    }

    return {Trajectory(species, std::move(frames), c.dt_fs), std::move(energies)};
}

Trajectory generate(const SimConfig& c) {
    return generate_with_energies(c).first;
}

std::tuple<Trajectory, Trajectory, Trajectory> split_dataset(const Trajectory& traj,
                                                             double train_frac, double valid_frac,
                                                             std::size_t min_frames) {
    if (!(train_frac > 0.0) || !(valid_frac > 0.0) || !(train_frac + valid_frac < 1.0)) {
        throw InvalidConfig("split fractions must be positive and sum below 1 (got " +
                            std::to_string(train_frac) + ", " + std::to_string(valid_frac) + ")");
    }
    const auto total = static_cast<double>(traj.n_frames());
    const auto n_train = static_cast<std::size_t>(std::llround(total * train_frac));
    const auto n_valid = static_cast<std::size_t>(std::llround(total * valid_frac));
    if (n_train + n_valid >= traj.n_frames()) {
        throw SegmentTooShort("split leaves no test frames");
    }
    const std::size_t n_test = traj.n_frames() - n_train - n_valid;
    const std::size_t need = std::max<std::size_t>(min_frames, 1);
    if (n_train < need || n_valid < need || n_test < need) {
        throw SegmentTooShort("split segments " + std::to_string(n_train) + "/" +
                              std::to_string(n_valid) + "/" + std::to_string(n_test) +
                              " fall below the required " + std::to_string(need) + " frames");
    }
    return {traj.slice(0, n_train), traj.slice(n_train, n_train + n_valid),
            traj.slice(n_train + n_valid, traj.n_frames())};
}

} // namespace atomcast
