#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "atomcast/trajectory.hpp"

namespace atomcast {

enum class TrajFormat { xyz, csv };

// Picks xyz for .xyz/.extxyz and csv for .csv; throws on anything else.
TrajFormat format_from_path(const std::filesystem::path& path);

// Extended-XYZ, one block per frame:
//   line 1: atom count
//   line 2: comment, `step=<int>` plus optional `dt_fs=<float>`
//   lines 3..: `<species> <x> <y> <z>`
// CSV: header `step,atom_id,species,x,y,z`, rows sorted by (step, atom_id),
// atom_id 0-based and stable across frames. CSV carries no dt; reads default
// it to 1 fs. Coordinates are written with 12 significant digits, so file
// round-trips stay below 1e-8 per coordinate.
Trajectory read_trajectory(const std::filesystem::path& path, TrajFormat format);
Trajectory read_trajectory(const std::filesystem::path& path); // format from extension

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path, TrajFormat format);
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);

Trajectory read_trajectory_xyz(std::istream& in, const std::string& source_name);
Trajectory read_trajectory_csv(std::istream& in, const std::string& source_name);
void write_trajectory_xyz(const Trajectory& traj, std::ostream& out);
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);

// Shared formatting helper: shortest decimal form at 12 significant digits.
std::string format_double(double v);

} // namespace atomcast
