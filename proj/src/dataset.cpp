#include "motionguide/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "motionguide/errors.hpp"
#include "motionguide/rng.hpp"

namespace mg {

const char* to_string(StrokeQuality q) noexcept { return q == StrokeQuality::good ? "good" : "poor"; }

const char* to_string(StrokeType t) noexcept {
  return t == StrokeType::backhand_drive ? "backhand_drive" : "forehand_clear";
}

StrokeQuality parse_quality(const std::string& text) {
  if (text == "good" || text == "1") return StrokeQuality::good;
  if (text == "poor" || text == "0") return StrokeQuality::poor;
  throw config_error("unknown stroke quality '" + text + "' (expected poor or good)");
}

StrokeType parse_stroke_type(const std::string& text) {
  if (text == "forehand_clear") return StrokeType::forehand_clear;
  if (text == "backhand_drive") return StrokeType::backhand_drive;
  throw config_error("unknown stroke type '" + text + "'");
}

Normalizer Normalizer::fit(std::span<const MotionSample> samples) {
  if (samples.empty()) throw config_error("cannot fit normalization on zero samples");
  const std::size_t channels = samples.front().channel_count();
  std::vector<double> sum(channels, 0.0);
  std::size_t count = 0;
  for (const auto& s : samples) {
    if (s.channel_count() != channels) throw structural_error("sample '" + s.id + "' has a different channel count");
    for (std::size_t t = 0; t < s.frame_count(); ++t) {
      for (std::size_t c = 0; c < channels; ++c) sum[c] += s.frames(t, c);
    }
    count += s.frame_count();
  }
  Normalizer n;
  n.mean.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) n.mean[c] = sum[c] / static_cast<double>(count);
  std::vector<double> sq(channels, 0.0);
  for (const auto& s : samples) {
    for (std::size_t t = 0; t < s.frame_count(); ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = s.frames(t, c) - n.mean[c];
        sq[c] += d * d;
      }
    }
  }
  n.scale.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(count));
    if (sd < 1e-12) {
      n.scale[c] = 1.0;
      n.clamped_channels.push_back(c);
    } else {
      n.scale[c] = sd;
    }
  }
  return n;
}

nd::Tensor Normalizer::apply(const nd::Tensor& frames) const {
  if (frames.rank() != 2 || frames.dim(1) != mean.size()) {
    throw structural_error("normalizer expects [T, " + std::to_string(mean.size()) + "] frames, got " +
                           nd::shape_string(frames.shape()));
  }
  nd::Tensor out = frames;
  for (std::size_t t = 0; t < out.dim(0); ++t) {
    for (std::size_t c = 0; c < out.dim(1); ++c) out(t, c) = (out(t, c) - mean[c]) / scale[c];
  }
  return out;
}

nd::Tensor Normalizer::invert(const nd::Tensor& frames) const {
  if (frames.rank() != 2 || frames.dim(1) != mean.size()) {
    throw structural_error("normalizer expects [T, " + std::to_string(mean.size()) + "] frames, got " +
                           nd::shape_string(frames.shape()));
  }
  nd::Tensor out = frames;
  for (std::size_t t = 0; t < out.dim(0); ++t) {
    for (std::size_t c = 0; c < out.dim(1); ++c) out(t, c) = out(t, c) * scale[c] + mean[c];
  }
  return out;
}

MotionSample Normalizer::apply(const MotionSample& sample) const {
  MotionSample out = sample;
  out.frames = apply(sample.frames);
  return out;
}

MotionSample Normalizer::invert(const MotionSample& sample) const {
  MotionSample out = sample;
  out.frames = invert(sample.frames);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.schema = schema;
  out.normalization = normalization;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.label) throw config_error("sample '" + s.id + "' has no quality label");
    out.push_back(class_index(*s.label));
  }
  return out;
}

void SynthConfig::validate() const {
  if (n_per_class == 0) throw config_error("synthetic n_per_class must be positive");
  if (frames < 2) throw config_error("synthetic frames must be at least 2");
  if (joints == 0) throw config_error("synthetic joints must be at least 1");
  if (!(class_separation >= 0.0) || !std::isfinite(class_separation)) {
    throw config_error("class_separation must be a finite value >= 0");
  }
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw config_error("noise_sd must be a finite value >= 0");
  if (!(frame_rate > 0.0)) throw config_error("frame_rate must be positive");
}

namespace {

struct JointTemplate {
  const char* name;
  std::array<double, 3> rest;  // meters
  double lever;                // share of the wrist displacement
};

constexpr std::array<JointTemplate, 5> kSkeleton{{
    {"wrist", {0.35, 0.00, 1.10}, 1.00},
    {"elbow", {0.30, 0.00, 1.30}, 0.55},
    {"shoulder", {0.20, 0.00, 1.45}, 0.25},
    {"hip", {0.10, 0.00, 0.95}, 0.10},
    {"root", {0.00, 0.00, 0.90}, 0.04},
}};

JointTemplate joint_template(std::size_t j) {
  if (j < kSkeleton.size()) return kSkeleton[j];
  // Extra joints sit between root and wrist with a decaying lever.
  const JointTemplate& root = kSkeleton.back();
  JointTemplate extra = root;
  extra.name = "";
  extra.rest = {root.rest[0] + 0.02 * static_cast<double>(j), 0.05, root.rest[2] + 0.03 * static_cast<double>(j)};
  extra.lever = 0.5 / static_cast<double>(j);
  return extra;
}

constexpr double kDirectionSpread = 0.2;
constexpr double kChainLag = 0.03;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::array<double, 3> unit(std::array<double, 3> v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  Dataset ds;
  ds.schema.frames = config.frames;
  ds.schema.joints = config.joints;
  ds.schema.frame_rate = config.frame_rate;
  for (std::size_t j = 0; j < config.joints; ++j) {
    const JointTemplate jt = joint_template(j);
    ds.schema.joint_names.push_back(*jt.name ? jt.name : "joint" + std::to_string(j));
  }

  const bool backhand = config.stroke_type == StrokeType::backhand_drive;
  const auto swing_dir = unit(backhand ? std::array<double, 3>{-0.8, 0.6, 0.1} : std::array<double, 3>{0.2, 0.6, 0.77});
  const auto arc_dir = unit(backhand ? std::array<double, 3>{0.0, 0.2, 1.0} : std::array<double, 3>{0.0, -0.8, 0.3});
  const double sep = config.class_separation;
  const std::size_t total = 2 * config.n_per_class;
  const std::size_t steps = config.frames;
  const std::size_t channels = 3 * config.joints;

  for (std::size_t i = 0; i < total; ++i) {
    Rng rng = Rng::derive(config.seed, i);
    const bool good = (i % 2) == 1;
    const double amplitude = 0.6 * (1.0 + (good ? 0.12 * sep : 0.0)) * (1.0 + 0.06 * rng.normal());
    const double peak = 0.55 - (good ? 0.025 * sep : 0.0) + 0.02 * rng.normal();
    const double width = 0.07 * (1.0 + 0.1 * rng.normal());
    const double tremor = 0.004 + (good ? 0.0 : 0.004 * sep);
    const double body = 1.0 + 0.04 * rng.normal();
    std::array<double, 3> offset{};
    for (double& o : offset) o = 0.03 * rng.normal();
    std::vector<double> phase(channels);
    for (double& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
    // Each joint swings in its own slightly tilted plane and peaks later the
    // further it sits from the root.
    std::vector<std::array<double, 3>> joint_swing(config.joints), joint_arc(config.joints);
    for (std::size_t j = 0; j < config.joints; ++j) {
      for (std::size_t a = 0; a < 3; ++a) {
        joint_swing[j][a] = swing_dir[a] + kDirectionSpread * rng.normal();
        joint_arc[j][a] = arc_dir[a] + kDirectionSpread * rng.normal();
      }
      joint_swing[j] = unit(joint_swing[j]);
      joint_arc[j] = unit(joint_arc[j]);
    }

    nd::Tensor frames({steps, channels});
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
      for (std::size_t j = 0; j < config.joints; ++j) {
        const JointTemplate jt = joint_template(j);
        const double jp = peak - kChainLag * static_cast<double>(std::min<std::size_t>(j, kSkeleton.size() - 1));
        const double backswing = 0.35 * std::exp(-0.5 * std::pow((t - (jp - 0.2)) / 0.08, 2));
        const double profile = normal_cdf((t - jp) / width) - backswing;
        const double arc = 0.3 * std::sin(std::numbers::pi * std::clamp(profile, 0.0, 1.0));
        for (std::size_t a = 0; a < 3; ++a) {
          const std::size_t c = 3 * j + a;
          const double swing = body * amplitude * jt.lever * (profile * joint_swing[j][a] + arc * joint_arc[j][a]);
          const double shake = tremor * jt.lever * std::sin(2.0 * std::numbers::pi * 8.0 * t + phase[c]);
          frames(k, c) = offset[a] + body * jt.rest[a] + swing + shake + config.noise_sd * rng.normal();
        }
      }
    }

    MotionSample s;
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    s.id = id;
    s.stroke_type = config.stroke_type;
    s.label = good ? StrokeQuality::good : StrokeQuality::poor;
    s.frames = std::move(frames);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

nd::Tensor resample_linear(const nd::Tensor& frames, std::size_t target_frames) {
  if (frames.rank() != 2 || frames.dim(0) < 2) {
    throw structural_error("resample needs at least 2 frames, got shape " + nd::shape_string(frames.shape()));
  }
  if (target_frames < 2) throw config_error("resample target must be at least 2 frames");
  const std::size_t n = frames.dim(0), channels = frames.dim(1);
  if (n == target_frames) return frames;
  nd::Tensor out({target_frames, channels});
  const double ratio = static_cast<double>(n - 1) / static_cast<double>(target_frames - 1);
  for (std::size_t k = 0; k < target_frames; ++k) {
    if (k == target_frames - 1) {
      for (std::size_t c = 0; c < channels; ++c) out(k, c) = frames(n - 1, c);
      continue;
    }
    const double u = static_cast<double>(k) * ratio;
    const std::size_t i = std::min(static_cast<std::size_t>(u), n - 2);
    const double frac = u - static_cast<double>(i);
    for (std::size_t c = 0; c < channels; ++c) {
      out(k, c) = frac == 0.0 ? frames(i, c) : frames(i, c) + frac * (frames(i + 1, c) - frames(i, c));
    }
  }
  return out;
}

NormalizedDataset normalize(const Dataset& dataset, std::span<const std::size_t> training_indices) {
  if (dataset.normalization) throw config_error("dataset is already normalized");
  std::vector<MotionSample> training;
  training.reserve(training_indices.size());
  for (std::size_t i : training_indices) training.push_back(dataset.samples.at(i));
  NormalizedDataset out{dataset, Normalizer::fit(training)};
  for (auto& s : out.data.samples) s.frames = out.normalizer.apply(s.frames);
  out.data.normalization = out.normalizer;
  return out;
}

std::vector<Fold> stratified_kfold(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw config_error("k-fold needs k >= 2");
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= by_class.size()) by_class.resize(labels[i] + 1);
    by_class[labels[i]].push_back(i);
  }
  std::vector<std::vector<std::size_t>> members(k);
  std::size_t next = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < k) {
      throw config_error("class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                         " samples, fewer than k=" + std::to_string(k));
    }
    Rng rng = Rng::derive(seed, c);
    rng.shuffle(std::span<std::size_t>(idx));
    // Round-robin continues across classes so fold sizes differ by at most one.
    for (std::size_t i : idx) members[next++ % k].push_back(i);
  }
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].validation = members[f];
    std::sort(folds[f].validation.begin(), folds[f].validation.end());
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), members[g].begin(), members[g].end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

std::vector<Fold> stratified_kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
  const auto labels = dataset.labels();
  return stratified_kfold(labels, k, seed);
}

MotionSample augment(const MotionSample& sample, const AugmentPolicy& policy, std::uint64_t seed) {
  Rng rng(seed);
  MotionSample out = sample;
  if (policy.amplitude_scale) {
    const double u = rng.uniform(policy.scale_min, policy.scale_max);
    for (double& v : out.frames.data()) v *= u;
  }
  if (policy.jitter && policy.noise_sd > 0.0) {
    for (double& v : out.frames.data()) v += policy.noise_sd * rng.normal();
  }
  return out;
}

}  // namespace mg
