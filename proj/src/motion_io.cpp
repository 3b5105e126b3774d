#include "motionguide/motion_io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "motionguide/errors.hpp"

namespace mg {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && (s[start] == ' ' || s[start] == '\t')) ++start;
  return s.substr(start);
}

std::string channel_name(std::size_t c) {
  static constexpr char axes[] = {'x', 'y', 'z'};
  return "j" + std::to_string(c / 3) + axes[c % 3];
}

std::string location(std::size_t line, const std::string& column) {
  return "line " + std::to_string(line) + ", column " + column;
}

}  // namespace

std::string motion_csv_header(std::size_t joints) {
  std::string header = "id,stroke_type,label,frame";
  for (std::size_t c = 0; c < 3 * joints; ++c) header += "," + channel_name(c);
  return header;
}

void write_motion_rows(std::ostream& out, std::span<const MotionSample> samples) {
  for (const auto& s : samples) {
    const std::string label = s.label ? to_string(*s.label) : "";
    for (std::size_t t = 0; t < s.frame_count(); ++t) {
      std::string row = fmt::format("{},{},{},{}", s.id, to_string(s.stroke_type), label, t);
      for (std::size_t c = 0; c < s.channel_count(); ++c) row += fmt::format(",{}", s.frames(t, c));
      out << row << '\n';
    }
  }
}

std::vector<MotionSample> read_motion_rows(std::istream& in, std::size_t& joints, std::size_t first_line) {
  std::string line;
  std::size_t line_no = first_line;
  if (!std::getline(in, line)) throw ingestion_error("motion table is empty (missing header)");
  const auto header = split_csv(trim(line));
  static const char* fixed[] = {"id", "stroke_type", "label", "frame"};
  for (std::size_t i = 0; i < 4; ++i) {
    if (header.size() <= i || trim(header[i]) != fixed[i]) {
      throw ingestion_error(location(line_no, std::to_string(i + 1)) + ": missing column '" + fixed[i] + "'");
    }
  }
  const std::size_t coords = header.size() - 4;
  if (coords == 0 || coords % 3 != 0) {
    throw ingestion_error(location(line_no, "header") + ": expected 3 coordinate columns per joint, found " +
                          std::to_string(coords));
  }
  for (std::size_t c = 0; c < coords; ++c) {
    if (trim(header[4 + c]) != channel_name(c)) {
      throw ingestion_error(location(line_no, std::to_string(5 + c)) + ": expected column '" + channel_name(c) +
                            "', found '" + header[4 + c] + "'");
    }
  }
  joints = coords / 3;

  std::vector<MotionSample> samples;
  std::vector<std::vector<double>> pending;
  auto flush = [&] {
    if (samples.empty() || pending.empty()) return;
    MotionSample& s = samples.back();
    if (pending.size() < 2) throw ingestion_error("sample '" + s.id + "' has fewer than 2 frames");
    std::vector<double> flat;
    flat.reserve(pending.size() * coords);
    for (auto& row : pending) flat.insert(flat.end(), row.begin(), row.end());
    s.frames = nd::Tensor({pending.size(), coords}, std::move(flat));
    pending.clear();
  };

  std::vector<std::string> seen_ids;
  while (in.peek() != EOF && in.peek() != '[') {
    std::getline(in, line);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ingestion_error(location(line_no, "*") + ": expected " + std::to_string(header.size()) + " columns, got " +
                            std::to_string(cells.size()) + " (inconsistent joint count)");
    }
    const std::string& id = cells[0];
    if (id.empty()) throw ingestion_error(location(line_no, "id") + ": empty sample id");
    if (samples.empty() || samples.back().id != id) {
      flush();
      for (const auto& prior : seen_ids) {
        if (prior == id) throw ingestion_error(location(line_no, "id") + ": frames of sample '" + id + "' are not contiguous");
      }
      seen_ids.push_back(id);
      MotionSample s;
      s.id = id;
      try {
        s.stroke_type = parse_stroke_type(trim(cells[1]));
        if (!trim(cells[2]).empty()) s.label = parse_quality(trim(cells[2]));
      } catch (const Error& e) {
        throw ingestion_error(location(line_no, "stroke_type/label") + ": " + e.what());
      }
      samples.push_back(std::move(s));
    }
    char* end = nullptr;
    const long frame = std::strtol(cells[3].c_str(), &end, 10);
    if (end == cells[3].c_str() || *end != '\0' || frame != static_cast<long>(pending.size())) {
      throw ingestion_error(location(line_no, "frame") + ": sample '" + id + "' expected frame " +
                            std::to_string(pending.size()) + ", found '" + cells[3] + "'");
    }
    std::vector<double> row(coords);
    for (std::size_t c = 0; c < coords; ++c) {
      const std::string& cell = cells[4 + c];
      const char* begin = cell.c_str();
      row[c] = std::strtod(begin, &end);
      if (end == begin || *end != '\0') {
        throw ingestion_error(location(line_no, channel_name(c)) + ": sample '" + id + "' has unparsable value '" +
                              cell + "'");
      }
      if (!std::isfinite(row[c])) {
        throw ingestion_error(location(line_no, channel_name(c)) + ": sample '" + id + "' has non-finite value in channel " +
                              channel_name(c));
      }
    }
    pending.push_back(std::move(row));
  }
  flush();
  return samples;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path meta = path;
  meta += ".meta";
  return meta;
}

void write_motion_file(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  out << motion_csv_header(dataset.schema.joints) << '\n';
  write_motion_rows(out, dataset.samples);
  if (!out) throw io_error("failed writing '" + path.string() + "'");

  std::ofstream meta(sidecar_path(path), std::ios::binary);
  if (!meta) throw io_error("cannot open '" + sidecar_path(path).string() + "' for writing");
  meta << "frame_rate: " << fmt::format("{}", dataset.schema.frame_rate) << '\n';
  meta << "joints: ";
  for (std::size_t j = 0; j < dataset.schema.joint_names.size(); ++j) {
    meta << (j ? "," : "") << dataset.schema.joint_names[j];
  }
  meta << '\n';
}

Dataset load_motion_file(const std::filesystem::path& path, std::size_t target_frames) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open motion file '" + path.string() + "'");
  Dataset ds;
  std::size_t joints = 0;
  auto raw = read_motion_rows(in, joints);
  ds.schema.joints = joints;
  ds.schema.frames = target_frames;

  std::ifstream meta(sidecar_path(path));
  if (meta) {
    std::string line;
    while (std::getline(meta, line)) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(line.substr(0, colon));
      const std::string value = trim(line.substr(colon + 1));
      if (key == "frame_rate") {
        ds.schema.frame_rate = std::strtod(value.c_str(), nullptr);
      } else if (key == "joints") {
        ds.schema.joint_names = split_csv(value);
      }
    }
    if (!ds.schema.joint_names.empty() && ds.schema.joint_names.size() != joints) {
      throw ingestion_error("sidecar lists " + std::to_string(ds.schema.joint_names.size()) + " joints, file has " +
                            std::to_string(joints));
    }
  }
  if (ds.schema.joint_names.empty()) {
    for (std::size_t j = 0; j < joints; ++j) ds.schema.joint_names.push_back("j" + std::to_string(j));
  }
  for (auto& s : raw) s.frames = resample_linear(s.frames, target_frames);
  ds.samples = std::move(raw);
  return ds;
}

}  // namespace mg
