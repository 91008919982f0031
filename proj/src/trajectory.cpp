#include "atomcast/trajectory.hpp"

#include <utility>

namespace atomcast {

Trajectory::Trajectory(std::vector<std::string> species, std::vector<Frame> frames, double dt_fs)
    : species_(std::move(species)), frames_(std::move(frames)), dt_fs_(dt_fs) {
    if (species_.size() < 2) {
        throw ShapeMismatch("trajectory needs at least 2 atoms, got " + std::to_string(species_.size()));
    }
    if (frames_.empty()) {
        throw TrajectoryTooShort("trajectory needs at least one frame");
    }
    if (!(dt_fs_ > 0.0)) {
        throw InvalidConfig("dt_fs must be positive, got " + std::to_string(dt_fs_));
    }
    for (std::size_t t = 0; t < frames_.size(); ++t) {
        const Frame& f = frames_[t];
        if (f.n_atoms() != species_.size()) {
            throw InconsistentAtomCount("frame " + std::to_string(t) + " has " +
                                        std::to_string(f.n_atoms()) + " atoms, expected " +
                                        std::to_string(species_.size()));
        }
        if (t > 0 && f.step_index != frames_[t - 1].step_index + 1) {
            throw ShapeMismatch("frames must have unit-stride step indices (frame " +
                                std::to_string(t) + ")");
        }
        for (const Vec3& p : f.positions) {
            if (!p.finite()) {
                throw ShapeMismatch("non-finite coordinate in frame " + std::to_string(t));
            }
        }
    }
}

Trajectory Trajectory::slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > frames_.size()) {
        throw IndexOutOfRange("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                              ") out of range for " + std::to_string(frames_.size()) + " frames");
    }
    std::vector<Frame> part(frames_.begin() + static_cast<std::ptrdiff_t>(begin),
                            frames_.begin() + static_cast<std::ptrdiff_t>(end));
    return Trajectory(species_, std::move(part), dt_fs_);
}

DisplacementSeries compute_displacements(const Trajectory& traj) {
    if (traj.n_frames() < 2) {
        throw TrajectoryTooShort("need at least 2 frames to form displacements, got " +
                                 std::to_string(traj.n_frames()));
    }
    DisplacementSeries out;
    out.n_atoms = traj.n_atoms();
    out.deltas.resize(traj.n_frames() - 1);
    for (std::size_t t = 0; t + 1 < traj.n_frames(); ++t) {
        auto& d = out.deltas[t];
        d.resize(out.n_atoms);
        for (std::size_t i = 0; i < out.n_atoms; ++i) {
            d[i] = traj.position(t + 1, i) - traj.position(t, i);
        }
    }
    return out;
}

Trajectory reconstruct_positions(const Frame& initial, const DisplacementSeries& deltas,
                                 std::vector<std::string> species, double dt_fs) {
    if (deltas.n_steps() > 0 && deltas.n_atoms != initial.n_atoms()) {
        throw ShapeMismatch("initial frame has " + std::to_string(initial.n_atoms()) +
                            " atoms but deltas have " + std::to_string(deltas.n_atoms));
    }
    if (species.size() != initial.n_atoms()) {
        throw ShapeMismatch("species count " + std::to_string(species.size()) +
                            " does not match atom count " + std::to_string(initial.n_atoms()));
    }
    std::vector<Frame> frames;
    frames.reserve(deltas.n_steps() + 1);
    frames.push_back(initial);
    for (std::size_t t = 0; t < deltas.n_steps(); ++t) {
        Frame next = frames.back();
        next.step_index += 1;
        for (std::size_t i = 0; i < next.positions.size(); ++i) {
            next.positions[i] += deltas.deltas[t][i];
        }
        frames.push_back(std::move(next));
    }
    return Trajectory(std::move(species), std::move(frames), dt_fs);
}

} // namespace atomcast
