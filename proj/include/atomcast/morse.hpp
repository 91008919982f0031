#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atomcast/trajectory.hpp"

namespace atomcast {

// Pairwise Morse curve E(d) = depth * (1 - exp(-steepness * (d - eq_dist)))^2 + offset.
// depth [eV], steepness [1/angstrom], eq_dist [angstrom], offset [eV].
struct MorseParams {
    double depth = 1.0;
    double steepness = 1.0;
    double eq_dist = 1.0;
    double offset = 0.0;
};

// Energy at distance d > 0, eV.
double morse_energy(const MorseParams& p, double d);

// dE/dd at distance d > 0, eV per angstrom.
double morse_energy_derivative(const MorseParams& p, double d);

// Euclidean distance between two atoms of one frame.
double pair_distance(const Frame& frame, std::size_t i, std::size_t j);

// "A-B" with A <= B lexicographically.
std::string species_pair_key(const std::string& a, const std::string& b);
// "i:j" with i < j.
std::string atom_pair_key(std::size_t i, std::size_t j);

// Morse parameters per species pair, keyed canonically.
class MorseTable {
public:
    MorseTable() = default;

    void set(const std::string& species_a, const std::string& species_b, const MorseParams& p);
    const MorseParams& lookup(const std::string& species_a, const std::string& species_b) const;
    bool contains(const std::string& species_a, const std::string& species_b) const;

    const std::map<std::string, MorseParams>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    // extreme equilibrium distances across all pairs; used for init spacing
    // and cutoff validation
    double min_eq_dist() const;
    double max_eq_dist() const;

private:
    std::map<std::string, MorseParams> entries_;
};

enum class ThresholdGranularity { per_species_pair, per_atom_pair };

// Max-observed-energy thresholds. Keys are either species-pair ("A-B") or
// atom-pair ("i:j"); atom-pair lookups fall back to the species entry when
// the exact atom pair was never observed.
class ThresholdTable {
public:
    explicit ThresholdTable(ThresholdGranularity granularity = ThresholdGranularity::per_species_pair)
        : granularity_(granularity) {}

    ThresholdGranularity granularity() const { return granularity_; }

    void set(const std::string& key, double tau);
    void merge_max(const std::string& key, double energy); // tau = max(tau, energy)

    double lookup(std::size_t atom_i, std::size_t atom_j, const std::string& species_i,
                  const std::string& species_j) const;

    const std::map<std::string, double>& entries() const { return entries_; }

private:
    ThresholdGranularity granularity_;
    std::map<std::string, double> entries_;
};

// tau per pair key = max over all frames of morse_energy at the observed
// distance. Per-species granularity pools every atom pair with the same
// species pair.
ThresholdTable compute_thresholds(const Trajectory& traj, const MorseTable& morse,
                                  ThresholdGranularity granularity);

struct FitReport {
    double rmse = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Damped least squares (Levenberg-Marquardt) fit of the Morse curve to
// (distance, energy) samples. Positivity of depth/steepness/eq_dist is kept
// by optimizing their logs. When no init is given: eq_dist <- distance of the
// lowest-energy sample, offset <- min energy, depth <- max-min (floored at
// 1e-6), steepness <- 1.
std::pair<MorseParams, FitReport> fit_morse(const std::vector<std::pair<double, double>>& samples,
                                            std::optional<MorseParams> init = std::nullopt);

// CSV `species_i,species_j,D_e,a,d_e,b` (canonical species_i <= species_j).
MorseTable read_morse_csv(const std::filesystem::path& path);
void write_morse_csv(const MorseTable& table, const std::filesystem::path& path);

// CSV `key,tau` where key is `<speciesA>-<speciesB>` or `<i>:<j>`.
ThresholdTable read_threshold_csv(const std::filesystem::path& path);
void write_threshold_csv(const ThresholdTable& table, const std::filesystem::path& path);

} // namespace atomcast
