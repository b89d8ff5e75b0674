#include "aploc/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace aploc {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string header_comment(std::uint64_t seed) {
  return std::string("# aploc ") + kVersion + " seed=" + std::to_string(seed) +
         "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw IoError("write failure on '" + path + "'");
}

namespace {

std::vector<double> parse_csv_row(const std::string& line,
                                  const std::string& context) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    const std::string cell = line.substr(pos, comma - pos);
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
      throw IoError(context + ": malformed number '" + cell + "'");
    row.push_back(v);
    pos = comma + 1;
    if (comma == line.size()) break;
  }
  return row;
}

// Non-comment, non-empty lines of a CSV body.
std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::string sensor_array_csv(const SensorArray& array, std::uint64_t seed) {
  std::string out = header_comment(seed);
  out += "x,y,z,ox,oy,oz\n";
  for (int i = 0; i < array.size(); ++i) {
    const Vec3& p = array.positions[i];
    const Vec3& o = array.orientations[i];
    out += format_double(p.x()) + ',' + format_double(p.y()) + ',' +
           format_double(p.z()) + ',' + format_double(o.x()) + ',' +
           format_double(o.y()) + ',' + format_double(o.z()) + '\n';
  }
  return out;
}

SensorArray parse_sensor_array_csv(const std::string& text) {
  SensorArray array;
  bool header_seen = false;
  for (const std::string& line : data_lines(text)) {
    if (!header_seen) {
      if (line != "x,y,z,ox,oy,oz")
        throw IoError("sensor CSV: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    const auto row = parse_csv_row(line, "sensor CSV");
    if (row.size() != 6) throw IoError("sensor CSV: expected 6 columns");
    array.positions.emplace_back(row[0], row[1], row[2]);
    array.orientations.emplace_back(row[3], row[4], row[5]);
  }
  array.validate();
  return array;
}

std::string grid_csv(const SourceGrid& grid, std::uint64_t seed) {
  std::string out = header_comment(seed);
  const bool fixed = grid.mode == OrientationMode::fixed;
  out += fixed ? "x,y,z,ox,oy,oz\n" : "x,y,z\n";
  for (int g = 0; g < grid.size(); ++g) {
    const Vec3& p = grid.points[g];
    out += format_double(p.x()) + ',' + format_double(p.y()) + ',' +
           format_double(p.z());
    if (fixed) {
      const Vec3& o = grid.orientations[g];
      out += ',' + format_double(o.x()) + ',' + format_double(o.y()) + ',' +
             format_double(o.z());
    }
    out += '\n';
  }
  return out;
}

std::string recording_csv(const Recording& rec, std::uint64_t seed) {
  std::string out = header_comment(seed);
  for (int i = 0; i < rec.sensor_count(); ++i) {
    for (int j = 0; j < rec.sample_count(); ++j) {
      if (j > 0) out += ',';
      out += format_double(rec.Y(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix parse_recording_csv(const std::string& text) {
  const auto lines = data_lines(text);
  if (lines.empty()) throw IoError("recording CSV: no data rows");
  std::vector<std::vector<double>> rows;
  for (const auto& line : lines) {
    rows.push_back(parse_csv_row(line, "recording CSV"));
    if (rows.back().size() != rows.front().size())
      throw IoError("recording CSV: ragged rows");
  }
  Matrix Y(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      Y(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return Y;
}

}  // namespace aploc
