#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "atomcast/morse.hpp"
#include "atomcast/trajectory.hpp"

namespace atomcast {

// Forecast accuracy in displacement and position space. The norms inside the
// sums are per-atom 3-vector Euclidean norms (not per-coordinate absolutes),
// averaged over horizon x atoms.
struct ForecastErrors {
    double mse_delta = 0.0; // angstrom^2
    double mae_delta = 0.0; // angstrom
    double mse_r = 0.0;     // angstrom^2
    double mae_r = 0.0;     // angstrom
};

// Position errors over all aligned frames; displacement errors over the
// successive differences of each trajectory. Same atom count and frame count
// required.
ForecastErrors forecast_errors(const Trajectory& pred, const Trajectory& truth);

struct ViolationReport {
    long v_n = 0;        // total violations
    double v_r = 0.0;    // v_n / (L * M)
    std::vector<int> per_step; // violations per frame
    int horizon = 0;     // L, frames evaluated
    int pairs_per_step = 0; // M actually used per frame
    std::string threshold_table; // label of the table the counts refer to
};

// Counts strict threshold exceedances over sampled pairs per frame
// (exhaustive when pairs_per_step covers all pairs).
ViolationReport violations(const Trajectory& traj, const MorseTable& morse,
                           const ThresholdTable& thresholds, int pairs_per_step,
                           std::uint64_t seed);

struct MsdCurve {
    std::vector<double> time_fs;
    std::vector<double> msd_A2; // mean squared displacement, angstrom^2
};

struct SpeciesDiffusivity {
    double d_A2_per_fs = 0.0;
    double d_m2_per_s = 0.0;
    double slope = 0.0;     // fitted MSD slope, angstrom^2/fs
    double intercept = 0.0; // angstrom^2
    double r_squared = 0.0; // linear-fit quality; low values flag non-diffusive motion
    MsdCurve msd;
};

struct DiffusivityReport {
    std::map<std::string, SpeciesDiffusivity> per_species;
    std::size_t fit_begin_lag = 0;
    std::size_t fit_end_lag = 0;
    bool multi_origin = true;
};

// Einstein-relation estimate D = slope / (2n) with n = 3 spatial dimensions,
// from a least-squares line over MSD(t) on [fit_begin_lag, fit_end_lag]
// (lag indices, inclusive). Multi-origin averaging is the default; single
// origin reproduces the plain |r(t) - r(0)|^2 average. species_filter empty
// means every species present.
DiffusivityReport diffusivity(const Trajectory& traj, const std::vector<std::string>& species_filter,
                              std::size_t fit_begin_lag, std::size_t fit_end_lag,
                              bool multi_origin = true);

// CSV `t_fs,msd_A2`.
void write_msd_csv(const MsdCurve& curve, const std::filesystem::path& path);

} // namespace atomcast
