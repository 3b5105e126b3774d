#include "motionguide/ndiff/layers.hpp"

#include <cmath>

#include "motionguide/errors.hpp"
#include "motionguide/ndiff/ops.hpp"
#include "motionguide/rng.hpp"

namespace mg::nd {

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::softmax: return "softmax";
    case LayerKind::mean_pool: return "mean_pool";
    case LayerKind::upsample: return "upsample";
    case LayerKind::reshape: return "reshape";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (LayerKind k : {LayerKind::dense, LayerKind::conv1d, LayerKind::relu, LayerKind::tanh, LayerKind::softmax,
                      LayerKind::mean_pool, LayerKind::upsample, LayerKind::reshape}) {
    if (name == to_string(k)) return k;
  }
  throw format_error("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::dense(std::string name, std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.name = std::move(name);
  s.in = in;
  s.out = out;
  return s;
}

LayerSpec LayerSpec::conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.name = std::move(name);
  s.in = in;
  s.out = out;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::activation(LayerKind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}

LayerSpec LayerSpec::mean_pool(std::size_t window, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::mean_pool;
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::upsample(std::size_t factor) {
  LayerSpec s;
  s.kind = LayerKind::upsample;
  s.window = factor;
  return s;
}

LayerSpec LayerSpec::reshape(Shape shape) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.shape = std::move(shape);
  return s;
}

Var layer_forward(const LayerSpec& layer, Var input, const WeightFn& weight) {
  switch (layer.kind) {
    case LayerKind::dense:
      return dense(input, weight(layer.name + ".weight"), weight(layer.name + ".bias"));
    case LayerKind::conv1d:
      return conv1d(input, weight(layer.name + ".weight"), weight(layer.name + ".bias"),
                    Conv1dSpec{layer.stride, layer.padding});
    case LayerKind::relu: return relu(input);
    case LayerKind::tanh: return tanh(input);
    case LayerKind::softmax: return softmax(input);
    case LayerKind::mean_pool: return mean_pool(input, layer.window, layer.stride);
    case LayerKind::upsample: return upsample(input, layer.window);
    case LayerKind::reshape: return reshape(input, layer.shape);
  }
  throw structural_error("unhandled layer kind");
}

Sequential::Sequential(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  for (const LayerSpec& layer : layers_) {
    if (layer.kind == LayerKind::dense) {
      params_.add(layer.name + ".weight", Tensor({layer.out, layer.in}));
      params_.add(layer.name + ".bias", Tensor({layer.out}));
    } else if (layer.kind == LayerKind::conv1d) {
      params_.add(layer.name + ".weight", Tensor({layer.out, layer.in, layer.kernel}));
      params_.add(layer.name + ".bias", Tensor({layer.out}));
    }
  }
}

void Sequential::initialize(Rng& rng) {
  for (const LayerSpec& layer : layers_) {
    if (layer.kind != LayerKind::dense && layer.kind != LayerKind::conv1d) continue;
    const double receptive = layer.kind == LayerKind::conv1d ? static_cast<double>(layer.kernel) : 1.0;
    const double fan_in = static_cast<double>(layer.in) * receptive;
    const double fan_out = static_cast<double>(layer.out) * receptive;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : params_.at(layer.name + ".weight").value.data()) w = rng.uniform(-bound, bound);
    params_.at(layer.name + ".bias").value.fill(0.0);
  }
  params_.zero_grad();
}

Var Sequential::forward(Tape& tape, Var x) const {
  const WeightFn weight = [&](const std::string& name) { return tape.constant(params_.at(name).value); };
  for (const LayerSpec& layer : layers_) x = layer_forward(layer, x, weight);
  return x;
}

Var Sequential::forward_trainable(Tape& tape, Var x) {
  const WeightFn weight = [&](const std::string& name) { return tape.param(params_.at(name)); };
  for (const LayerSpec& layer : layers_) x = layer_forward(layer, x, weight);
  return x;
}

}  // namespace mg::nd
