#include "atomcast/morse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "atomcast/traj_io.hpp"

namespace atomcast {

namespace {

// Overflow guard for the repulsive wall: exp is clamped so the squared term
// stays below DBL_MAX. Only reachable at distances far outside any physical
// configuration.
double bounded_exp(double x) {
    return std::exp(std::min(x, 350.0));
}

void check_params(const MorseParams& p) {
    if (!(p.depth > 0.0) || !(p.steepness > 0.0) || !(p.eq_dist > 0.0) || !std::isfinite(p.offset)) {
        throw InvalidConfig("Morse parameters require depth > 0, steepness > 0, eq_dist > 0, finite offset");
    }
}

} // namespace

double morse_energy(const MorseParams& p, double d) {
    if (!(d > 0.0)) {
        throw NonPositiveDistance("morse_energy requires d > 0, got " + std::to_string(d));
    }
    const double u = bounded_exp(-p.steepness * (d - p.eq_dist));
    const double w = 1.0 - u;
    return p.depth * w * w + p.offset;
}

double morse_energy_derivative(const MorseParams& p, double d) {
    if (!(d > 0.0)) {
        throw NonPositiveDistance("morse_energy_derivative requires d > 0, got " + std::to_string(d));
    }
    const double u = bounded_exp(-p.steepness * (d - p.eq_dist));
    return 2.0 * p.depth * p.steepness * (1.0 - u) * u;
}

double pair_distance(const Frame& frame, std::size_t i, std::size_t j) {
    if (i >= frame.n_atoms() || j >= frame.n_atoms()) {
        throw IndexOutOfRange("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") out of range for " + std::to_string(frame.n_atoms()) + " atoms");
    }
    if (i == j) {
        throw SelfPair("pair distance needs two distinct atoms, got i == j == " + std::to_string(i));
    }
    return (frame.positions[i] - frame.positions[j]).norm();
}

std::string species_pair_key(const std::string& a, const std::string& b) {
    return a <= b ? a + "-" + b : b + "-" + a;
}

std::string atom_pair_key(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return std::to_string(i) + ":" + std::to_string(j);
}

void MorseTable::set(const std::string& a, const std::string& b, const MorseParams& p) {
    check_params(p);
    entries_[species_pair_key(a, b)] = p;
}

const MorseParams& MorseTable::lookup(const std::string& a, const std::string& b) const {
    const auto it = entries_.find(species_pair_key(a, b));
    if (it == entries_.end()) {
        throw MissingPairParams("no Morse parameters for species pair '" + species_pair_key(a, b) + "'");
    }
    return it->second;
}

bool MorseTable::contains(const std::string& a, const std::string& b) const {
    return entries_.count(species_pair_key(a, b)) > 0;
}

double MorseTable::min_eq_dist() const {
    if (entries_.empty()) throw EmptyInput("MorseTable is empty");
    double m = entries_.begin()->second.eq_dist;
    for (const auto& [key, p] : entries_) m = std::min(m, p.eq_dist);
    return m;
}

double MorseTable::max_eq_dist() const {
    if (entries_.empty()) throw EmptyInput("MorseTable is empty");
    double m = entries_.begin()->second.eq_dist;
    for (const auto& [key, p] : entries_) m = std::max(m, p.eq_dist);
    return m;
}

void ThresholdTable::set(const std::string& key, double tau) {
    if (!std::isfinite(tau)) throw InvalidConfig("threshold for '" + key + "' must be finite");
    entries_[key] = tau;
}

void ThresholdTable::merge_max(const std::string& key, double energy) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        entries_[key] = energy;
    } else {
        it->second = std::max(it->second, energy);
    }
}

double ThresholdTable::lookup(std::size_t atom_i, std::size_t atom_j, const std::string& species_i,
                              const std::string& species_j) const {
    if (granularity_ == ThresholdGranularity::per_atom_pair) {
        const auto it = entries_.find(atom_pair_key(atom_i, atom_j));
        if (it != entries_.end()) return it->second;
        // pair never observed: fall back to the pooled species entry
    }
    const auto it = entries_.find(species_pair_key(species_i, species_j));
    if (it == entries_.end()) {
        throw MissingPairParams("no threshold for atom pair " + atom_pair_key(atom_i, atom_j) +
                                " (species '" + species_pair_key(species_i, species_j) + "')");
    }
    return it->second;
}

ThresholdTable compute_thresholds(const Trajectory& traj, const MorseTable& morse,
                                  ThresholdGranularity granularity) {
    const std::size_t n = traj.n_atoms();
    const auto& species = traj.species();
    // validate coverage up front so the error names the pair, not a frame
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!morse.contains(species[i], species[j])) {
                throw MissingPairParams("no Morse parameters for species pair '" +
                                        species_pair_key(species[i], species[j]) + "'");
            }
        }
    }

    ThresholdTable table(granularity);
    for (std::size_t t = 0; t < traj.n_frames(); ++t) {
        const Frame& f = traj.frame(t);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = pair_distance(f, i, j);
                const double e = morse_energy(morse.lookup(species[i], species[j]), d);
                const std::string key = granularity == ThresholdGranularity::per_atom_pair
                                            ? atom_pair_key(i, j)
                                            : species_pair_key(species[i], species[j]);
                table.merge_max(key, e);
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt fit
// ---------------------------------------------------------------------------

namespace {

// internal parameterization: q = (log depth, log steepness, log eq_dist, offset)
std::array<double, 4> to_internal(const MorseParams& p) {
    return {std::log(p.depth), std::log(p.steepness), std::log(p.eq_dist), p.offset};
}

MorseParams from_internal(const std::array<double, 4>& q) {
    return {std::exp(q[0]), std::exp(q[1]), std::exp(q[2]), q[3]};
}

double sum_squared_residuals(const std::vector<std::pair<double, double>>& samples,
                             const MorseParams& p) {
    double ssr = 0.0;
    for (const auto& [d, y] : samples) {
        const double r = morse_energy(p, d) - y;
        ssr += r * r;
    }
    return ssr;
}

// residual Jacobian wrt internal parameters, one row per sample
void jacobian_row(const MorseParams& p, double d, std::array<double, 4>& row) {
    const double u = bounded_exp(-p.steepness * (d - p.eq_dist));
    const double w = 1.0 - u;
    const double dE_ddepth = w * w;
    const double dE_dsteep = 2.0 * p.depth * w * (d - p.eq_dist) * u;
    const double dE_deq = -2.0 * p.depth * p.steepness * w * u;
    row[0] = p.depth * dE_ddepth;  // chain rule through log depth
    row[1] = p.steepness * dE_dsteep;
    row[2] = p.eq_dist * dE_deq;
    row[3] = 1.0;
}

// 4x4 solve with partial pivoting; returns false when singular
bool solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4> b,
            std::array<double, 4>& x) {
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r) {
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        }
        if (std::fabs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < 4; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int r = 3; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 4; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return true;
}

MorseParams heuristic_init(const std::vector<std::pair<double, double>>& samples) {
    double min_e = samples[0].second, max_e = samples[0].second;
    double d_at_min = samples[0].first;
    for (const auto& [d, y] : samples) {
        if (y < min_e) {
            min_e = y;
            d_at_min = d;
        }
        max_e = std::max(max_e, y);
    }
    MorseParams p;
    p.eq_dist = d_at_min;
    p.offset = min_e;
    p.depth = std::max(max_e - min_e, 1e-6);
    p.steepness = 1.0;
    return p;
}

} // namespace

std::pair<MorseParams, FitReport> fit_morse(const std::vector<std::pair<double, double>>& samples,
                                            std::optional<MorseParams> init) {
    if (samples.size() < 5) {
        throw DegenerateSamples("need at least 5 samples, got " + std::to_string(samples.size()));
    }
    std::set<double> distinct;
    for (const auto& [d, y] : samples) {
        if (!(d > 0.0)) throw NonPositiveDistance("sample distance must be positive, got " + std::to_string(d));
        if (!std::isfinite(y)) throw DegenerateSamples("non-finite sample energy");
        distinct.insert(d);
    }
    if (distinct.size() < 5) {
        throw DegenerateSamples("need at least 5 distinct distances, got " + std::to_string(distinct.size()));
    }

    MorseParams p = init ? *init : heuristic_init(samples);
    if (init) check_params(p);

    FitReport report;
    const std::size_t m = samples.size();

    // flat data has no curvature to fit; report the heuristic as-is
    double min_e = samples[0].second, max_e = samples[0].second;
    for (const auto& [d, y] : samples) {
        min_e = std::min(min_e, y);
        max_e = std::max(max_e, y);
    }
    if (max_e - min_e == 0.0) {
        report.rmse = std::sqrt(sum_squared_residuals(samples, p) / static_cast<double>(m));
        report.converged = false;
        return {p, report};
    }

    std::array<double, 4> q = to_internal(p);
    double ssr = sum_squared_residuals(samples, p);
    double damping = 1e-3;
    const double damping_cap = 1e10;
    const int max_iterations = 200;

    for (int iter = 0; iter < max_iterations; ++iter) {
        report.iterations = iter + 1;

        // assemble normal equations J^T J and J^T r at the current point
        std::array<std::array<double, 4>, 4> jtj{};
        std::array<double, 4> jtr{};
        for (std::size_t k = 0; k < m; ++k) {
            const auto& [d, y] = samples[k];
            std::array<double, 4> row{};
            jacobian_row(p, d, row);
            const double r = morse_energy(p, d) - y;
            for (int a = 0; a < 4; ++a) {
                jtr[a] += row[a] * r;
                for (int b = 0; b < 4; ++b) jtj[a][b] += row[a] * row[b];
            }
        }

        // inner loop: raise damping until a step is accepted
        bool accepted = false;
        while (damping <= damping_cap) {
            auto lhs = jtj;
            for (int a = 0; a < 4; ++a) {
                lhs[a][a] += damping * std::max(jtj[a][a], 1e-12);
            }
            std::array<double, 4> neg_jtr{-jtr[0], -jtr[1], -jtr[2], -jtr[3]};
            std::array<double, 4> delta{};
            if (solve4(lhs, neg_jtr, delta)) {
                std::array<double, 4> q_trial = q;
                for (int a = 0; a < 4; ++a) q_trial[a] += delta[a];
                // keep the exp() of log-params representable
                bool sane = true;
                for (int a = 0; a < 3; ++a) {
                    if (!(q_trial[a] > -300.0 && q_trial[a] < 300.0)) sane = false;
                }
                if (sane && std::isfinite(q_trial[3])) {
                    const MorseParams p_trial = from_internal(q_trial);
                    const double ssr_trial = sum_squared_residuals(samples, p_trial);
                    if (std::isfinite(ssr_trial) && ssr_trial <= ssr) {
                        const double rel_change = (ssr - ssr_trial) / std::max(ssr, 1e-300);
                        q = q_trial;
                        p = p_trial;
                        ssr = ssr_trial;
                        damping = std::max(damping / 10.0, 1e-12);
                        accepted = true;
                        if (rel_change < 1e-12) {
                            report.converged = true;
                        }
                        break;
                    }
                }
            }
            damping *= 10.0;
        }

        if (!accepted) {
            throw FitDiverged("damping exceeded " + std::to_string(damping_cap) +
                              " without residual decrease (ssr=" + std::to_string(ssr) + ")");
        }
        if (report.converged) break;
    }

    report.rmse = std::sqrt(ssr / static_cast<double>(m));
    return {p, report};
}

// ---------------------------------------------------------------------------
// CSV round-trips
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field(const std::string& tok, const std::string& src, std::size_t line_no,
                   const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(src + ":" + std::to_string(line_no) + ": bad " + std::string(what) +
                         " value '" + tok + "'");
    }
}

} // namespace

MorseTable read_morse_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(path.string() + ":1: empty file");
    ++line_no;
    if (split_on(line, ',') != std::vector<std::string>{"species_i", "species_j", "D_e", "a", "d_e", "b"}) {
        throw ParseError(path.string() + ":1: header must be 'species_i,species_j,D_e,a,d_e,b'");
    }
    MorseTable table;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto toks = split_on(line, ',');
        if (toks.size() != 6) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 6 fields");
        }
        MorseParams p;
        p.depth = parse_field(toks[2], path.string(), line_no, "D_e");
        p.steepness = parse_field(toks[3], path.string(), line_no, "a");
        p.eq_dist = parse_field(toks[4], path.string(), line_no, "d_e");
        p.offset = parse_field(toks[5], path.string(), line_no, "b");
        table.set(toks[0], toks[1], p);
    }
    return table;
}

void write_morse_csv(const MorseTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "species_i,species_j,D_e,a,d_e,b\n";
    for (const auto& [key, p] : table.entries()) {
        const auto dash = key.find('-');
        out << key.substr(0, dash) << "," << key.substr(dash + 1) << "," << format_double(p.depth)
            << "," << format_double(p.steepness) << "," << format_double(p.eq_dist) << ","
            << format_double(p.offset) << "\n";
    }
}

ThresholdTable read_threshold_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(path.string() + ":1: empty file");
    ++line_no;
    if (split_on(line, ',') != std::vector<std::string>{"key", "tau"}) {
        throw ParseError(path.string() + ":1: header must be 'key,tau'");
    }
    // granularity is inferred: any atom-pair key switches the table over
    ThresholdGranularity gran = ThresholdGranularity::per_species_pair;
    std::vector<std::pair<std::string, double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto toks = split_on(line, ',');
        if (toks.size() != 2) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 2 fields");
        }
        if (toks[0].find(':') != std::string::npos) gran = ThresholdGranularity::per_atom_pair;
        rows.emplace_back(toks[0], parse_field(toks[1], path.string(), line_no, "tau"));
    }
    ThresholdTable table(gran);
    for (const auto& [key, tau] : rows) table.set(key, tau);
    return table;
}

void write_threshold_csv(const ThresholdTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "key,tau\n";
    for (const auto& [key, tau] : table.entries()) {
        out << key << "," << format_double(tau) << "\n";
    }
}

} // namespace atomcast
