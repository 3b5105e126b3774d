#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "motionguide/ndiff/tape.hpp"
#include "motionguide/ndiff/tensor.hpp"

namespace mg {
class Rng;
}

namespace mg::nd {

enum class LayerKind { dense, conv1d, relu, tanh, softmax, mean_pool, upsample, reshape };

const char* to_string(LayerKind kind) noexcept;
LayerKind layer_kind_from_string(const std::string& name);

/// One layer of a Sequential stack. Fields not used by a kind stay zero.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;        // parameter prefix for dense/conv1d ("<name>.weight", "<name>.bias")
  std::size_t in = 0;      // dense input features / conv input channels
  std::size_t out = 0;     // dense output features / conv output channels
  std::size_t kernel = 0;  // conv1d kernel width
  std::size_t stride = 1;  // conv1d and mean_pool stride
  std::size_t padding = 0; // conv1d zero padding
  std::size_t window = 0;  // mean_pool window, upsample factor
  Shape shape;             // reshape target

  static LayerSpec dense(std::string name, std::size_t in, std::size_t out);
  static LayerSpec conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel,
                          std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec activation(LayerKind kind);
  static LayerSpec mean_pool(std::size_t window, std::size_t stride);
  static LayerSpec upsample(std::size_t factor);
  static LayerSpec reshape(Shape shape);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Resolves a parameter name to a Var on the active tape.
using WeightFn = std::function<Var(const std::string&)>;

/// Applies one layer. Shape mismatches raise a structural error naming the
/// expected and actual shapes.
Var layer_forward(const LayerSpec& layer, Var input, const WeightFn& weight);

/// A stack of layers with its parameters.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<LayerSpec> layers);

  /// Glorot-uniform weights, zero biases.
  void initialize(Rng& rng);

  /// Inference: weights enter the tape as constants.
  Var forward(Tape& tape, Var x) const;
  /// Training: weights enter as parameters and collect gradients.
  Var forward_trainable(Tape& tape, Var x);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

 private:
  std::vector<LayerSpec> layers_;
  ParameterSet params_;
};

}  // namespace mg::nd
