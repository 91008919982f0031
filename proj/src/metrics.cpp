#include "atomcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "atomcast/rng.hpp"
#include "atomcast/simgen.hpp"
#include "atomcast/traj_io.hpp"
#include "atomcast/training.hpp"

namespace atomcast {

ForecastErrors forecast_errors(const Trajectory& pred, const Trajectory& truth) {
    if (pred.n_atoms() != truth.n_atoms()) {
        throw ShapeMismatch("prediction has " + std::to_string(pred.n_atoms()) +
                            " atoms, truth has " + std::to_string(truth.n_atoms()));
    }
    if (pred.n_frames() != truth.n_frames()) {
        throw HorizonMismatch("prediction has " + std::to_string(pred.n_frames()) +
                              " frames, truth has " + std::to_string(truth.n_frames()));
    }
    const std::size_t n = pred.n_atoms();
    const std::size_t t_total = pred.n_frames();

    ForecastErrors out;
    for (std::size_t t = 0; t < t_total; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const double norm = (pred.position(t, i) - truth.position(t, i)).norm();
            out.mse_r += norm * norm;
            out.mae_r += norm;
        }
    }
    const double count_r = static_cast<double>(t_total) * static_cast<double>(n);
    out.mse_r /= count_r;
    out.mae_r /= count_r;

    if (t_total >= 2) {
        for (std::size_t t = 0; t + 1 < t_total; ++t) {
            for (std::size_t i = 0; i < n; ++i) {
                const Vec3 dp = pred.position(t + 1, i) - pred.position(t, i);
                const Vec3 dt = truth.position(t + 1, i) - truth.position(t, i);
                const double norm = (dp - dt).norm();
                out.mse_delta += norm * norm;
                out.mae_delta += norm;
            }
        }
        const double count_d = static_cast<double>(t_total - 1) * static_cast<double>(n);
        out.mse_delta /= count_d;
        out.mae_delta /= count_d;
    }
    return out;
}

ViolationReport violations(const Trajectory& traj, const MorseTable& morse,
                           const ThresholdTable& thresholds, int pairs_per_step,
                           std::uint64_t seed) {
    if (pairs_per_step < 1) throw InvalidConfig("pairs_per_step must be >= 1");
    const auto n = static_cast<int>(traj.n_atoms());
    const auto& species = traj.species();
    const auto pairs = all_atom_pairs(n);
    const int m_used = std::min<int>(pairs_per_step, static_cast<int>(pairs.size()));
    RngStream rng(derive_seed(seed, "metrics.violations"));

    ViolationReport report;
    report.horizon = static_cast<int>(traj.n_frames());
    report.pairs_per_step = m_used;
    report.per_step.resize(traj.n_frames(), 0);

    for (std::size_t t = 0; t < traj.n_frames(); ++t) {
        const Frame& f = traj.frame(t);
        const auto chosen = rng.sample_without_replacement(static_cast<int>(pairs.size()), m_used);
        int count = 0;
        for (const int k : chosen) {
            const auto [i, j] = pairs[static_cast<std::size_t>(k)];
            const double d = pair_distance(f, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            const double e = morse_energy(
                morse.lookup(species[static_cast<std::size_t>(i)], species[static_cast<std::size_t>(j)]), d);
            const double tau = thresholds.lookup(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                                 species[static_cast<std::size_t>(i)],
                                                 species[static_cast<std::size_t>(j)]);
            if (e > tau) ++count;
        }
        report.per_step[t] = count;
        report.v_n += count;
    }
    report.v_r = static_cast<double>(report.v_n) /
                 (static_cast<double>(report.horizon) * static_cast<double>(m_used));
    return report;
}

namespace {

// least squares y = a*x + b; returns (slope, intercept, r^2)
std::tuple<double, double, double> linear_fit(const std::vector<double>& x,
                                              const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sx += x[k];
        sy += y[k];
        sxx += x[k] * x[k];
        sxy += x[k] * y[k];
        syy += y[k] * y[k];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return {0.0, y.empty() ? 0.0 : sy / n, 0.0};
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    double ss_res = 0.0;
    const double mean_y = sy / n;
    double ss_tot = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double fit = slope * x[k] + intercept;
        ss_res += (y[k] - fit) * (y[k] - fit);
        ss_tot += (y[k] - mean_y) * (y[k] - mean_y);
    }
    const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return {slope, intercept, r2};
}

} // namespace

DiffusivityReport diffusivity(const Trajectory& traj, const std::vector<std::string>& species_filter,
                              std::size_t fit_begin_lag, std::size_t fit_end_lag, bool multi_origin) {
    const std::size_t t_total = traj.n_frames();
    if (fit_begin_lag >= fit_end_lag) {
        throw WindowOutOfRange("fit window must satisfy begin < end");
    }
    if (fit_end_lag >= t_total) {
        throw WindowOutOfRange("fit window end lag " + std::to_string(fit_end_lag) +
                               " exceeds available lags (" + std::to_string(t_total - 1) + ")");
    }

    std::vector<std::string> wanted = species_filter;
    if (wanted.empty()) {
        std::set<std::string> distinct(traj.species().begin(), traj.species().end());
        wanted.assign(distinct.begin(), distinct.end());
    }

    DiffusivityReport report;
    report.fit_begin_lag = fit_begin_lag;
    report.fit_end_lag = fit_end_lag;
    report.multi_origin = multi_origin;

    const std::size_t max_lag = fit_end_lag;
    for (const std::string& sp : wanted) {
        std::vector<std::size_t> atoms;
        for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
            if (traj.species()[i] == sp) atoms.push_back(i);
        }
        if (atoms.empty()) throw NoAtomsOfSpecies("no atoms of species '" + sp + "'");

        SpeciesDiffusivity sd;
        sd.msd.time_fs.resize(max_lag + 1);
        sd.msd.msd_A2.resize(max_lag + 1);
        for (std::size_t lag = 0; lag <= max_lag; ++lag) {
            sd.msd.time_fs[lag] = static_cast<double>(lag) * traj.dt_fs();
            double acc = 0.0;
            std::size_t count = 0;
            const std::size_t origin_end = multi_origin ? t_total - lag : 1;
            for (std::size_t origin = 0; origin < origin_end; ++origin) {
                for (const std::size_t i : atoms) {
                    acc += (traj.position(origin + lag, i) - traj.position(origin, i)).norm2();
                    ++count;
                }
            }
            sd.msd.msd_A2[lag] = count > 0 ? acc / static_cast<double>(count) : 0.0;
        }

        std::vector<double> xs(sd.msd.time_fs.begin() + static_cast<std::ptrdiff_t>(fit_begin_lag),
                               sd.msd.time_fs.begin() + static_cast<std::ptrdiff_t>(fit_end_lag) + 1);
        std::vector<double> ys(sd.msd.msd_A2.begin() + static_cast<std::ptrdiff_t>(fit_begin_lag),
                               sd.msd.msd_A2.begin() + static_cast<std::ptrdiff_t>(fit_end_lag) + 1);
        const auto [slope, intercept, r2] = linear_fit(xs, ys);
        sd.slope = slope;
        sd.intercept = intercept;
        sd.r_squared = r2;
        sd.d_A2_per_fs = slope / 6.0; // 2 * n with n = 3 dimensions
        sd.d_m2_per_s = sd.d_A2_per_fs * units::a2fs_to_m2s;
        report.per_species.emplace(sp, std::move(sd));
    }
    return report;
}

void write_msd_csv(const MsdCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "t_fs,msd_A2\n";
    for (std::size_t k = 0; k < curve.time_fs.size(); ++k) {
        out << format_double(curve.time_fs[k]) << "," << format_double(curve.msd_A2[k]) << "\n";
    }
}

} // namespace atomcast
