#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "motionguide/dataset.hpp"
#include "motionguide/ndiff/layers.hpp"

namespace mg {

using Probabilities = std::array<double, kNumClasses>;

/// Architecture and optimizer settings shared by the classifier and the
/// autoencoder.
struct ModelHyperparams {
  std::size_t channels = 16;    // conv feature maps
  std::size_t kernel = 5;       // odd, so "same" padding keeps length
  std::size_t latent_dim = 16;  // autoencoder code size L
  std::size_t pool = 2;         // autoencoder temporal pooling factor; must divide T
  std::size_t segments = 6;     // classifier temporal pooling bins; must divide T
  std::size_t mlp_hidden = 32;
  std::size_t epochs = 50;      // classifier
  std::size_t ae_epochs = 150;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;

  void validate(std::size_t frames) const;
};

enum class ClassifierKind { conv1d, mlp };
const char* to_string(ClassifierKind kind) noexcept;
ClassifierKind parse_classifier_kind(const std::string& text);

/// Maps [T, D] frames to a probability vector over {poor, good}.
class Classifier {
 public:
  Classifier() = default;
  Classifier(ClassifierKind kind, std::size_t frames, std::size_t channels, nd::Sequential net);

  static Classifier create(ClassifierKind kind, std::size_t frames, std::size_t channels,
                           const ModelHyperparams& hp);

  nd::Var forward(nd::Tape& tape, nd::Var frames) const;
  nd::Var forward_trainable(nd::Tape& tape, nd::Var frames);

  Probabilities predict_proba(const nd::Tensor& frames) const;
  StrokeQuality predict(const nd::Tensor& frames) const;

  ClassifierKind kind() const noexcept { return kind_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t channels() const noexcept { return channels_; }
  nd::Sequential& network() noexcept { return net_; }
  const nd::Sequential& network() const noexcept { return net_; }

 private:
  void check_input(const nd::Tensor& frames) const;

  ClassifierKind kind_ = ClassifierKind::conv1d;
  std::size_t frames_ = 0;
  std::size_t channels_ = 0;
  nd::Sequential net_;
};

/// Argmax with ties resolved to the lower class index.
StrokeQuality argmax(const Probabilities& p);

/// Conv encoder [T, D] -> [L] and mirrored decoder [L] -> [T, D].
class Autoencoder {
 public:
  Autoencoder() = default;
  Autoencoder(std::size_t frames, std::size_t channels, std::size_t latent_dim, nd::Sequential encoder,
              nd::Sequential decoder);

  static Autoencoder create(std::size_t frames, std::size_t channels, const ModelHyperparams& hp);

  nd::Var encode(nd::Tape& tape, nd::Var frames) const;
  nd::Var decode(nd::Tape& tape, nd::Var code) const;

  nd::Tensor encode(const nd::Tensor& frames) const;
  nd::Tensor decode(const nd::Tensor& code) const;
  nd::Tensor reconstruct(const nd::Tensor& frames) const { return decode(encode(frames)); }

  /// Joint trainable pass x -> decode(encode(x)).
  nd::Var reconstruct_trainable(nd::Tape& tape, nd::Var frames);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t latent_dim() const noexcept { return latent_dim_; }
  nd::Sequential& encoder() noexcept { return encoder_; }
  nd::Sequential& decoder() noexcept { return decoder_; }
  const nd::Sequential& encoder() const noexcept { return encoder_; }
  const nd::Sequential& decoder() const noexcept { return decoder_; }

 private:
  std::size_t frames_ = 0;
  std::size_t channels_ = 0;
  std::size_t latent_dim_ = 0;
  nd::Sequential encoder_;
  nd::Sequential decoder_;
};

struct TrainingTrace {
  std::vector<double> train_loss;       // mean loss per epoch
  std::vector<double> validation_loss;  // empty without a validation set
};

struct TrainedClassifier {
  Classifier model;
  TrainingTrace trace;
};

struct TrainedAutoencoder {
  Autoencoder model;
  TrainingTrace trace;
};

/// Cross-entropy training with Adam. Divergence (non-finite loss) raises a
/// numerical error reporting the last finite epoch.
TrainedClassifier train_classifier(const Dataset& train, const ModelHyperparams& hp,
                                   ClassifierKind kind = ClassifierKind::conv1d,
                                   const Dataset* validation = nullptr);

/// Mean-squared reconstruction training with Adam; labels are ignored.
TrainedAutoencoder train_autoencoder(const Dataset& train, const ModelHyperparams& hp,
                                     const Dataset* validation = nullptr);

/// Mean over channels of the per-channel reconstruction RMSE.
double reconstruction_rmse(const Autoencoder& ae, const Dataset& data);

/// Predicts the most frequent training class (ties go to the lower index).
struct MajorityBaseline {
  StrokeQuality majority = StrokeQuality::poor;

  static MajorityBaseline fit(std::span<const std::size_t> labels);
  StrokeQuality predict() const noexcept { return majority; }
};

}  // namespace mg
