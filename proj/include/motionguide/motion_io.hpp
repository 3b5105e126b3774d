#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "motionguide/dataset.hpp"

namespace mg {

/// CSV header: id,stroke_type,label,frame,j0x,j0y,j0z,...
std::string motion_csv_header(std::size_t joints);

/// Writes one row per frame. Values use the shortest round-trip decimal form.
void write_motion_rows(std::ostream& out, std::span<const MotionSample> samples);

/// Parses rows until end of stream or a line starting with '['. Line numbers
/// in errors are offset by first_line.
std::vector<MotionSample> read_motion_rows(std::istream& in, std::size_t& joints, std::size_t first_line = 1);

/// Motion file plus "<path>.meta" sidecar (frame_rate, joints).
void write_motion_file(const Dataset& dataset, const std::filesystem::path& path);

/// Loads a motion file and resamples each sample to target_frames. The
/// sidecar is optional; without it joints are named j0, j1, ...
Dataset load_motion_file(const std::filesystem::path& path, std::size_t target_frames);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace mg
