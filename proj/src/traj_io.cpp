#include "atomcast/traj_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace atomcast {

namespace {

std::string lower_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

[[noreturn]] void parse_fail(const std::string& src, std::size_t line_no, const std::string& what) {
    throw ParseError(src + ":" + std::to_string(line_no) + ": " + what);
}

bool parse_double(const std::string& tok, double& out) {
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_long(const std::string& tok, long& out) {
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// extracts `key=<value>` from an extended-xyz comment line
bool find_key_value(const std::string& comment, const std::string& key, std::string& value) {
    const std::string needle = key + "=";
    std::size_t pos = 0;
    while ((pos = comment.find(needle, pos)) != std::string::npos) {
        // must start a token
        if (pos == 0 || std::isspace(static_cast<unsigned char>(comment[pos - 1]))) {
            const std::size_t vbegin = pos + needle.size();
            std::size_t vend = vbegin;
            while (vend < comment.size() && !std::isspace(static_cast<unsigned char>(comment[vend]))) ++vend;
            value = comment.substr(vbegin, vend - vbegin);
            return true;
        }
        pos += needle.size();
    }
    return false;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

TrajFormat format_from_path(const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".xyz" || ext == ".extxyz") return TrajFormat::xyz;
    if (ext == ".csv") return TrajFormat::csv;
    throw InvalidConfig("cannot infer trajectory format from extension '" + ext + "' (" +
                        path.string() + ")");
}

Trajectory read_trajectory_xyz(std::istream& in, const std::string& src) {
    std::vector<std::string> species;
    std::vector<Frame> frames;
    double dt_fs = 1.0;
    bool dt_seen = false;

    std::string line;
    std::size_t line_no = 0;
    while (true) {
        if (!std::getline(in, line)) break;
        ++line_no;
        // tolerate trailing blank lines between frames
        if (split_ws(line).empty()) continue;

        long n_atoms = 0;
        if (!parse_long(line, n_atoms) || n_atoms <= 0) {
            parse_fail(src, line_no, "expected atom count, got '" + line + "'");
        }
        if (!frames.empty() && static_cast<std::size_t>(n_atoms) != species.size()) {
            throw InconsistentAtomCount(src + ":" + std::to_string(line_no) + ": frame has " +
                                        std::to_string(n_atoms) + " atoms, expected " +
                                        std::to_string(species.size()));
        }

        if (!std::getline(in, line)) parse_fail(src, line_no + 1, "missing comment line");
        ++line_no;
        Frame frame;
        std::string value;
        if (find_key_value(line, "step", value)) {
            long step = 0;
            if (!parse_long(value, step)) parse_fail(src, line_no, "bad step value '" + value + "'");
            frame.step_index = step;
        } else {
            frame.step_index = frames.empty() ? 0 : frames.back().step_index + 1;
        }
        if (!dt_seen && find_key_value(line, "dt_fs", value)) {
            if (!parse_double(value, dt_fs)) parse_fail(src, line_no, "bad dt_fs value '" + value + "'");
            dt_seen = true;
        }

        frame.positions.reserve(static_cast<std::size_t>(n_atoms));
        for (long i = 0; i < n_atoms; ++i) {
            if (!std::getline(in, line)) parse_fail(src, line_no + 1, "truncated frame");
            ++line_no;
            const auto toks = split_ws(line);
            if (toks.size() < 4) parse_fail(src, line_no, "expected '<species> <x> <y> <z>'");
            Vec3 p;
            if (!parse_double(toks[1], p.x)) parse_fail(src, line_no, "bad x coordinate '" + toks[1] + "'");
            if (!parse_double(toks[2], p.y)) parse_fail(src, line_no, "bad y coordinate '" + toks[2] + "'");
            if (!parse_double(toks[3], p.z)) parse_fail(src, line_no, "bad z coordinate '" + toks[3] + "'");
            if (frames.empty()) {
                species.push_back(toks[0]);
            } else if (species[static_cast<std::size_t>(i)] != toks[0]) {
                parse_fail(src, line_no, "species mismatch for atom " + std::to_string(i) + ": '" +
                                             toks[0] + "' vs '" + species[static_cast<std::size_t>(i)] + "'");
            }
            frame.positions.push_back(p);
        }
        frames.push_back(std::move(frame));
    }
    if (frames.empty()) parse_fail(src, line_no, "no frames found");
    return Trajectory(std::move(species), std::move(frames), dt_fs);
}

void write_trajectory_xyz(const Trajectory& traj, std::ostream& out) {
    for (std::size_t t = 0; t < traj.n_frames(); ++t) {
        const Frame& f = traj.frame(t);
        out << traj.n_atoms() << "\n";
        out << "step=" << f.step_index;
        if (t == 0) out << " dt_fs=" << format_double(traj.dt_fs());
        out << "\n";
        for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
            const Vec3& p = f.positions[i];
            out << traj.species()[i] << " " << format_double(p.x) << " " << format_double(p.y)
                << " " << format_double(p.z) << "\n";
        }
    }
}

Trajectory read_trajectory_csv(std::istream& in, const std::string& src) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) parse_fail(src, 1, "empty file");
    ++line_no;

    const std::vector<std::string> expected = {"step", "atom_id", "species", "x", "y", "z"};
    const auto header = split_csv(line);
    for (const auto& col : expected) {
        if (std::find(header.begin(), header.end(), col) == header.end()) {
            parse_fail(src, line_no, "missing column '" + col + "'");
        }
    }
    if (header != expected) {
        parse_fail(src, line_no, "header must be exactly 'step,atom_id,species,x,y,z'");
    }

    std::vector<std::string> species;
    std::vector<Frame> frames;
    long current_step = 0;
    long expected_atom = 0;
    bool in_frame = false;

    auto close_frame = [&](Frame& f) {
        if (!in_frame) return;
        if (!frames.empty() && f.n_atoms() != species.size()) {
            throw InconsistentAtomCount(src + ": frame step=" + std::to_string(current_step) +
                                        " has " + std::to_string(f.n_atoms()) + " atoms, expected " +
                                        std::to_string(species.size()));
        }
        frames.push_back(std::move(f));
        f = Frame{};
        in_frame = false;
    };

    Frame frame;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto toks = split_csv(line);
        if (toks.size() != 6) parse_fail(src, line_no, "expected 6 fields, got " + std::to_string(toks.size()));
        long step = 0, atom_id = 0;
        if (!parse_long(toks[0], step)) parse_fail(src, line_no, "bad step '" + toks[0] + "'");
        if (!parse_long(toks[1], atom_id)) parse_fail(src, line_no, "bad atom_id '" + toks[1] + "'");
        Vec3 p;
        if (!parse_double(toks[3], p.x)) parse_fail(src, line_no, "bad x coordinate '" + toks[3] + "'");
        if (!parse_double(toks[4], p.y)) parse_fail(src, line_no, "bad y coordinate '" + toks[4] + "'");
        if (!parse_double(toks[5], p.z)) parse_fail(src, line_no, "bad z coordinate '" + toks[5] + "'");

        if (!in_frame || step != current_step) {
            close_frame(frame);
            in_frame = true;
            current_step = step;
            expected_atom = 0;
            frame.step_index = step;
        }
        if (atom_id != expected_atom) {
            parse_fail(src, line_no, "rows must be sorted by (step, atom_id); expected atom_id " +
                                         std::to_string(expected_atom) + ", got " + std::to_string(atom_id));
        }
        if (frames.empty()) {
            if (static_cast<std::size_t>(atom_id) == species.size()) {
                species.push_back(toks[2]);
            }
        } else if (toks[2] != species[static_cast<std::size_t>(atom_id)]) {
            parse_fail(src, line_no, "species mismatch for atom " + std::to_string(atom_id));
        }
        frame.positions.push_back(p);
        ++expected_atom;
    }
    close_frame(frame);
    if (frames.empty()) parse_fail(src, line_no, "no data rows found");
    return Trajectory(std::move(species), std::move(frames), 1.0);
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
    out << "step,atom_id,species,x,y,z\n";
    for (std::size_t t = 0; t < traj.n_frames(); ++t) {
        const Frame& f = traj.frame(t);
        for (std::size_t i = 0; i < traj.n_atoms(); ++i) {
            const Vec3& p = f.positions[i];
            out << f.step_index << "," << i << "," << traj.species()[i] << ","
                << format_double(p.x) << "," << format_double(p.y) << "," << format_double(p.z)
                << "\n";
        }
    }
}

Trajectory read_trajectory(const std::filesystem::path& path, TrajFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return format == TrajFormat::xyz ? read_trajectory_xyz(in, path.string())
                                     : read_trajectory_csv(in, path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
    return read_trajectory(path, format_from_path(path));
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path, TrajFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    if (format == TrajFormat::xyz) {
        write_trajectory_xyz(traj, out);
    } else {
        write_trajectory_csv(traj, out);
    }
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    write_trajectory(traj, path, format_from_path(path));
}

} // namespace atomcast
