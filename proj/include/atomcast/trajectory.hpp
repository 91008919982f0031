#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "atomcast/errors.hpp"

namespace atomcast {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double norm2() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm2()); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// One snapshot of the system: per-atom positions in angstrom at a discrete
// time index.
struct Frame {
    std::vector<Vec3> positions;
    long step_index = 0;

    std::size_t n_atoms() const { return positions.size(); }
};

// Ordered sequence of frames over a fixed set of atoms. Immutable after
// construction; the constructor enforces the shape invariants (N >= 2 and
// constant, unit-stride step indices, finite coordinates, dt > 0).
class Trajectory {
public:
    Trajectory(std::vector<std::string> species, std::vector<Frame> frames, double dt_fs);

    std::size_t n_atoms() const { return species_.size(); }
    std::size_t n_frames() const { return frames_.size(); }
    double dt_fs() const { return dt_fs_; }

    const std::vector<std::string>& species() const { return species_; }
    const std::vector<Frame>& frames() const { return frames_; }
    const Frame& frame(std::size_t t) const { return frames_[t]; }
    const Vec3& position(std::size_t t, std::size_t atom) const { return frames_[t].positions[atom]; }

    // frames [begin, end) as a standalone trajectory
    Trajectory slice(std::size_t begin, std::size_t end) const;

private:
    std::vector<std::string> species_;
    std::vector<Frame> frames_;
    double dt_fs_ = 1.0;
};

// Per-step atomic displacements: deltas[t][i] = r_{t+1}^i - r_t^i, angstrom.
struct DisplacementSeries {
    std::size_t n_atoms = 0;
    std::vector<std::vector<Vec3>> deltas;

    std::size_t n_steps() const { return deltas.size(); }
};

// Successive frame differences. Requires T >= 2.
DisplacementSeries compute_displacements(const Trajectory& traj);

// Cumulative sum of displacements on top of `initial`. Frame 0 of the result
// equals `initial`; frame t+1 adds deltas[t]. Species labels and dt are
// metadata for the resulting trajectory.
Trajectory reconstruct_positions(const Frame& initial, const DisplacementSeries& deltas,
                                 std::vector<std::string> species, double dt_fs = 1.0);

} // namespace atomcast
