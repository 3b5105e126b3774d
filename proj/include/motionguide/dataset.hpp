#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "motionguide/ndiff/tensor.hpp"

namespace mg {

enum class StrokeQuality : int { poor = 0, good = 1 };
enum class StrokeType { forehand_clear, backhand_drive };

inline constexpr std::size_t kNumClasses = 2;

const char* to_string(StrokeQuality q) noexcept;
const char* to_string(StrokeType t) noexcept;
StrokeQuality parse_quality(const std::string& text);
StrokeType parse_stroke_type(const std::string& text);
inline StrokeQuality opposite(StrokeQuality q) {
  return q == StrokeQuality::good ? StrokeQuality::poor : StrokeQuality::good;
}
inline std::size_t class_index(StrokeQuality q) { return static_cast<std::size_t>(q); }

/// One stroke: frames is [T, 3 * J], joint-major with x, y, z per joint.
struct MotionSample {
  std::string id;
  StrokeType stroke_type = StrokeType::forehand_clear;
  std::optional<StrokeQuality> label;
  nd::Tensor frames;

  std::size_t frame_count() const { return frames.dim(0); }
  std::size_t channel_count() const { return frames.dim(1); }
};

struct MotionSchema {
  std::size_t frames = 60;
  std::size_t joints = 5;
  double frame_rate = 60.0;
  std::vector<std::string> joint_names;

  std::size_t channels() const { return 3 * joints; }
};

/// Per-channel z-scoring. Channels with (near) zero variance keep scale 1
/// and are listed in clamped_channels.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<std::size_t> clamped_channels;

  /// Statistics over every frame of the given samples.
  static Normalizer fit(std::span<const MotionSample> samples);

  nd::Tensor apply(const nd::Tensor& frames) const;
  nd::Tensor invert(const nd::Tensor& frames) const;
  MotionSample apply(const MotionSample& sample) const;
  MotionSample invert(const MotionSample& sample) const;
};

/// Samples sharing one schema. normalization is set once the samples hold
/// z-scored values.
struct Dataset {
  MotionSchema schema;
  std::vector<MotionSample> samples;
  std::optional<Normalizer> normalization;

  std::size_t size() const noexcept { return samples.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Class index per sample; throws if any sample is unlabeled.
  std::vector<std::size_t> labels() const;
};

struct SynthConfig {
  std::size_t n_per_class = 50;
  std::size_t frames = 60;
  std::size_t joints = 5;
  double class_separation = 2.0;
  double noise_sd = 0.001;  // meters
  double frame_rate = 60.0;
  StrokeType stroke_type = StrokeType::forehand_clear;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Smooth multi-joint swings built from Gaussian velocity bumps. Good
/// strokes swing faster, peak earlier and carry less tremor, each by an
/// amount proportional to class_separation. Sample i has label i % 2.
Dataset generate_synthetic(const SynthConfig& config);

/// Linear interpolation over normalized time; endpoints are kept exactly.
nd::Tensor resample_linear(const nd::Tensor& frames, std::size_t target_frames);

struct NormalizedDataset {
  Dataset data;
  Normalizer normalizer;
};

/// Fits statistics on the training indices only and applies them to every sample.
NormalizedDataset normalize(const Dataset& dataset, std::span<const std::size_t> training_indices);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Class-stratified k-fold split. Every class needs at least k members.
std::vector<Fold> stratified_kfold(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed);
std::vector<Fold> stratified_kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed);

struct AugmentPolicy {
  bool jitter = true;
  double noise_sd = 0.01;  // normalized units
  bool amplitude_scale = true;
  double scale_min = 0.9;
  double scale_max = 1.1;
};

/// Scales all channels by u ~ U[scale_min, scale_max], then adds Gaussian jitter.
MotionSample augment(const MotionSample& sample, const AugmentPolicy& policy, std::uint64_t seed);

}  // namespace mg
