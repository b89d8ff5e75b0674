#pragma once

#include "aploc/geometry.hpp"
#include "aploc/projection.hpp"

#include <cstdint>
#include <string>

namespace aploc {

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

/// First line of every output file: "# aploc <version> seed=<seed>".
std::string header_comment(std::uint64_t seed);

std::string read_text_file(const std::string& path);   // throws IoError
void write_text_file(const std::string& path, const std::string& content);

/// CSV with header `x,y,z,ox,oy,oz`, one row per sensor, SI units.
std::string sensor_array_csv(const SensorArray& array, std::uint64_t seed);
SensorArray parse_sensor_array_csv(const std::string& text);

/// CSV with header `x,y,z[,ox,oy,oz]` (orientations in fixed mode).
std::string grid_csv(const SourceGrid& grid, std::uint64_t seed);

/// Sensors x samples matrix, one sensor per row.
std::string recording_csv(const Recording& rec, std::uint64_t seed);
Matrix parse_recording_csv(const std::string& text);

}  // namespace aploc
