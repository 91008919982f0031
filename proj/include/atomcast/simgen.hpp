#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "atomcast/morse.hpp"
#include "atomcast/trajectory.hpp"

namespace atomcast {

namespace units {
// Boltzmann constant, eV per kelvin.
inline constexpr double k_boltzmann_ev = 8.617333262e-5;
// (eV/angstrom)/amu expressed in angstrom/fs^2; also converts
// amu*(angstrom/fs)^2 back to eV via division.
inline constexpr double ev_per_amu_accel = 9.64853321233e-3;
// angstrom^2/fs -> m^2/s
inline constexpr double a2fs_to_m2s = 1e-5;
} // namespace units

enum class ThermostatKind { none, langevin, velocity_rescale };

struct Thermostat {
    ThermostatKind kind = ThermostatKind::none;
    double gamma_per_fs = 0.1; // langevin friction
    int rescale_interval = 10; // velocity_rescale period, steps
};

// Reference classical-MD run: pairwise Morse forces, velocity-Verlet
// integration, optional thermostat. Deterministic given the seed.
struct SimConfig {
    int n_atoms = 0;
    std::vector<std::pair<std::string, int>> species_counts; // assignment order is as listed
    double box_side = 10.0;      // angstrom
    double temperature_K = 300.0;
    int n_steps = 2;             // total recorded frames, including the initial one
    double dt_fs = 1.0;
    Thermostat thermostat;
    std::uint64_t seed = 0;
    MorseTable morse;
    double cutoff = 6.0;         // force truncation radius, angstrom
    bool reflective_walls = true;
    double mass_amu = 1.0;       // uniform atomic mass
};

// Velocity-Verlet trajectory of `n_steps` frames. Initial placement is a
// jittered cubic lattice with Maxwell-Boltzmann velocities; throws BlowUp
// (with the step index) if a coordinate passes 1e6 angstrom or an energy
// turns NaN.
Trajectory generate(const SimConfig& config);

// Instantaneous potential + kinetic energy bookkeeping for a running system;
// exposed for the energy-conservation checks.
struct SimEnergies {
    double potential_ev = 0.0;
    double kinetic_ev = 0.0;
    double total() const { return potential_ev + kinetic_ev; }
};

// Per-frame energies recomputed from a trajectory by finite-differencing the
// velocities is lossy, so generate_with_energies records them in-line.
std::pair<Trajectory, std::vector<SimEnergies>> generate_with_energies(const SimConfig& config);

// Total Morse force on every atom of a frame (thermostat excluded), eV/angstrom.
std::vector<Vec3> morse_forces(const Frame& frame, const std::vector<std::string>& species,
                               const MorseTable& morse, double cutoff);

// Contiguous temporal split train -> valid -> test. Fractions must be
// positive and sum below 1; the remainder becomes the test segment.
// Throws SegmentTooShort when any segment ends up below min_frames.
std::tuple<Trajectory, Trajectory, Trajectory> split_dataset(const Trajectory& traj,
                                                             double train_frac, double valid_frac,
                                                             std::size_t min_frames = 1);

} // namespace atomcast
