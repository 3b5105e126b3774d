#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "motionguide/harness.hpp"
#include "motionguide/motion_io.hpp"

namespace mg {

void export_motion(const MotionSample& original, const CFResult& cf, const ModelBundle& bundle,
                   const std::filesystem::path& path) {
  if (original.frames.shape() != cf.counterfactual.shape()) {
    throw structural_error("original " + nd::shape_string(original.frames.shape()) + " and counterfactual " +
                           nd::shape_string(cf.counterfactual.shape()) + " differ in shape");
  }
  PairedMotion paired;
  paired.schema = bundle.schema;
  paired.valid = cf.valid;
  paired.method = to_string(cf.method);
  paired.iterations = cf.iterations;
  paired.final_prob = cf.final_prob;
  paired.original = bundle.normalizer.invert(original);
  paired.counterfactual = original;
  paired.counterfactual.id = original.id + "-cf";
  paired.counterfactual.frames = bundle.normalizer.invert(cf.counterfactual);
  write_paired_motion(paired, path);
}

void write_paired_motion(const PairedMotion& p, const std::filesystem::path& path) {
  std::ostringstream out;
  std::string names;
  for (const auto& n : p.schema.joint_names) names += (names.empty() ? "" : ",") + n;
  out << "joints: " << p.schema.joints << '\n'
      << "joint_names: " << names << '\n'
      << fmt::format("frame_rate: {}\n", p.schema.frame_rate) << "frames: " << p.original.frames.shape()[0] << '\n'
      << "valid: " << (p.valid ? "true" : "false") << '\n'
      << "method: " << p.method << '\n'
      << "iterations: " << p.iterations << '\n'
      << fmt::format("final_prob: {}\n", p.final_prob) << "units: meters\n";
  out << "[original]\n" << motion_csv_header(p.schema.joints) << '\n';
  write_motion_rows(out, std::span<const MotionSample>(&p.original, 1));
  out << "[counterfactual]\n" << motion_csv_header(p.schema.joints) << '\n';
  write_motion_rows(out, std::span<const MotionSample>(&p.counterfactual, 1));
  write_text_file(path, out.str());
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

MotionSample read_table(std::istream& in, std::size_t& line_no, const char* section, std::size_t joints) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != fmt::format("[{}]", section)) {
    throw ingestion_error(fmt::format("line {}: expected [{}]", line_no + 1, section));
  }
  ++line_no;
  std::size_t found = 0;
  auto samples = read_motion_rows(in, found, line_no + 1);
  if (samples.size() != 1) {
    throw ingestion_error(fmt::format("[{}] holds {} samples, expected 1", section, samples.size()));
  }
  if (found != joints) {
    throw ingestion_error(fmt::format("[{}] has {} joints, header says {}", section, found, joints));
  }
  line_no += 1 + samples.front().frames.shape()[0];
  return std::move(samples.front());
}

}  // namespace

PairedMotion read_paired_motion(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  PairedMotion p;
  std::size_t line_no = 0;
  std::string line;
  while (in.peek() != EOF && in.peek() != '[') {
    std::getline(in, line);
    ++line_no;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      if (trim(line).empty()) continue;
      throw ingestion_error(fmt::format("line {}: expected 'key: value'", line_no));
    }
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    try {
      if (key == "joints") {
        p.schema.joints = std::stoul(value);
      } else if (key == "joint_names") {
        std::stringstream ss(value);
        for (std::string name; std::getline(ss, name, ',');) p.schema.joint_names.push_back(trim(name));
      } else if (key == "frame_rate") {
        p.schema.frame_rate = std::stod(value);
      } else if (key == "frames") {
        p.schema.frames = std::stoul(value);
      } else if (key == "valid") {
        if (value != "true" && value != "false") throw std::invalid_argument("not a boolean");
        p.valid = value == "true";
      } else if (key == "method") {
        p.method = value;
      } else if (key == "iterations") {
        p.iterations = std::stoul(value);
      } else if (key == "final_prob") {
        p.final_prob = std::stod(value);
      }
    } catch (const std::exception&) {
      throw ingestion_error(fmt::format("line {}: bad value '{}' for {}", line_no, value, key));
    }
  }
  p.original = read_table(in, line_no, "original", p.schema.joints);
  p.counterfactual = read_table(in, line_no, "counterfactual", p.schema.joints);
  if (p.original.frames.shape() != p.counterfactual.frames.shape()) {
    throw ingestion_error("original and counterfactual tables differ in shape");
  }
  return p;
}

}  // namespace mg
