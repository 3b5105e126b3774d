#include "motionguide/models.hpp"

#include <cmath>
#include <numeric>

#include "motionguide/errors.hpp"
#include "motionguide/ndiff/adam.hpp"
#include "motionguide/ndiff/ops.hpp"
#include "motionguide/rng.hpp"

namespace mg {

using nd::LayerKind;
using nd::LayerSpec;

void ModelHyperparams::validate(std::size_t frames) const {
  if (channels == 0 || latent_dim == 0 || mlp_hidden == 0) throw config_error("layer widths must be positive");
  if (kernel == 0 || kernel % 2 == 0) throw config_error("kernel must be odd");
  if (pool == 0 || frames % pool != 0) {
    throw config_error("pool " + std::to_string(pool) + " must divide the frame count " + std::to_string(frames));
  }
  if (segments == 0 || frames % segments != 0) {
    throw config_error("segments " + std::to_string(segments) + " must divide the frame count " +
                       std::to_string(frames));
  }
  if (epochs == 0 || ae_epochs == 0) throw config_error("epoch counts must be positive");
  if (batch_size == 0) throw config_error("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw config_error("learning_rate must be positive");
}

const char* to_string(ClassifierKind kind) noexcept { return kind == ClassifierKind::mlp ? "mlp" : "conv1d"; }

ClassifierKind parse_classifier_kind(const std::string& text) {
  if (text == "conv1d") return ClassifierKind::conv1d;
  if (text == "mlp") return ClassifierKind::mlp;
  throw config_error("unknown classifier kind '" + text + "'");
}

StrokeQuality argmax(const Probabilities& p) { return p[1] > p[0] ? StrokeQuality::good : StrokeQuality::poor; }

Classifier::Classifier(ClassifierKind kind, std::size_t frames, std::size_t channels, nd::Sequential net)
    : kind_(kind), frames_(frames), channels_(channels), net_(std::move(net)) {}

Classifier Classifier::create(ClassifierKind kind, std::size_t frames, std::size_t channels,
                              const ModelHyperparams& hp) {
  hp.validate(frames);
  std::vector<LayerSpec> layers;
  if (kind == ClassifierKind::conv1d) {
    const std::size_t pad = hp.kernel / 2;
    layers = {LayerSpec::conv1d("conv1", channels, hp.channels, hp.kernel, 1, pad),
              LayerSpec::activation(LayerKind::relu),
              LayerSpec::conv1d("conv2", hp.channels, hp.channels, hp.kernel, 1, pad),
              LayerSpec::activation(LayerKind::relu),
              LayerSpec::mean_pool(frames / hp.segments, frames / hp.segments),
              LayerSpec::reshape({hp.segments * hp.channels}),
              LayerSpec::dense("head", hp.segments * hp.channels, kNumClasses),
              LayerSpec::activation(LayerKind::softmax)};
  } else {
    layers = {LayerSpec::reshape({frames * channels}),
              LayerSpec::dense("hidden", frames * channels, hp.mlp_hidden),
              LayerSpec::activation(LayerKind::relu),
              LayerSpec::dense("head", hp.mlp_hidden, kNumClasses),
              LayerSpec::activation(LayerKind::softmax)};
  }
  nd::Sequential net(std::move(layers));
  Rng rng = Rng::derive(hp.seed, kind == ClassifierKind::conv1d ? 101 : 102);
  net.initialize(rng);
  return Classifier(kind, frames, channels, std::move(net));
}

void Classifier::check_input(const nd::Tensor& frames) const {
  if (frames.shape() != nd::Shape{frames_, channels_}) {
    throw structural_error("classifier expects frames " + nd::shape_string({frames_, channels_}) + ", got " +
                           nd::shape_string(frames.shape()));
  }
}

nd::Var Classifier::forward(nd::Tape& tape, nd::Var frames) const {
  check_input(frames.value());
  return net_.forward(tape, frames);
}

nd::Var Classifier::forward_trainable(nd::Tape& tape, nd::Var frames) {
  check_input(frames.value());
  return net_.forward_trainable(tape, frames);
}

Probabilities Classifier::predict_proba(const nd::Tensor& frames) const {
  nd::Tape tape;
  const nd::Tensor& p = forward(tape, tape.constant(frames)).value();
  return {p[0], p[1]};
}

StrokeQuality Classifier::predict(const nd::Tensor& frames) const { return argmax(predict_proba(frames)); }

Autoencoder::Autoencoder(std::size_t frames, std::size_t channels, std::size_t latent_dim, nd::Sequential encoder,
                         nd::Sequential decoder)
    : frames_(frames),
      channels_(channels),
      latent_dim_(latent_dim),
      encoder_(std::move(encoder)),
      decoder_(std::move(decoder)) {}

Autoencoder Autoencoder::create(std::size_t frames, std::size_t channels, const ModelHyperparams& hp) {
  hp.validate(frames);
  const std::size_t pad = hp.kernel / 2;
  const std::size_t pooled = frames / hp.pool;
  const std::size_t hidden = pooled * hp.channels;
  nd::Sequential encoder({LayerSpec::conv1d("conv", channels, hp.channels, hp.kernel, 1, pad),
                          LayerSpec::activation(LayerKind::relu),
                          LayerSpec::mean_pool(hp.pool, hp.pool),
                          LayerSpec::reshape({hidden}),
                          LayerSpec::dense("code", hidden, hp.latent_dim)});
  nd::Sequential decoder({LayerSpec::dense("expand", hp.latent_dim, hidden),
                          LayerSpec::activation(LayerKind::tanh),
                          LayerSpec::reshape({pooled, hp.channels}),
                          LayerSpec::upsample(hp.pool),
                          LayerSpec::conv1d("conv", hp.channels, channels, hp.kernel, 1, pad)});
  Rng enc_rng = Rng::derive(hp.seed, 201);
  Rng dec_rng = Rng::derive(hp.seed, 202);
  encoder.initialize(enc_rng);
  decoder.initialize(dec_rng);
  return Autoencoder(frames, channels, hp.latent_dim, std::move(encoder), std::move(decoder));
}

nd::Var Autoencoder::encode(nd::Tape& tape, nd::Var frames) const {
  if (frames.shape() != nd::Shape{frames_, channels_}) {
    throw structural_error("encoder expects frames " + nd::shape_string({frames_, channels_}) + ", got " +
                           nd::shape_string(frames.shape()));
  }
  return encoder_.forward(tape, frames);
}

nd::Var Autoencoder::decode(nd::Tape& tape, nd::Var code) const {
  if (code.shape() != nd::Shape{latent_dim_}) {
    throw structural_error("decoder expects a latent code " + nd::shape_string({latent_dim_}) + ", got " +
                           nd::shape_string(code.shape()));
  }
  return decoder_.forward(tape, code);
}

nd::Tensor Autoencoder::encode(const nd::Tensor& frames) const {
  nd::Tape tape;
  return encode(tape, tape.constant(frames)).value();
}

nd::Tensor Autoencoder::decode(const nd::Tensor& code) const {
  nd::Tape tape;
  return decode(tape, tape.constant(code)).value();
}

nd::Var Autoencoder::reconstruct_trainable(nd::Tape& tape, nd::Var frames) {
  return decoder_.forward_trainable(tape, encoder_.forward_trainable(tape, frames));
}

namespace {

// Shared minibatch loop. `loss_of` builds one sample's loss on a tape with
// trainable weights; `eval_of` returns the loss without recording gradients.
template <class LossFn, class EvalFn>
TrainingTrace fit(std::vector<nd::ParameterSet*> param_sets, std::size_t n, std::size_t epochs,
                  const ModelHyperparams& hp, const char* what, LossFn&& loss_of, EvalFn&& eval_of, std::size_t n_validation) {
  if (n == 0) throw config_error(std::string(what) + ": empty training set");
  // Adam is elementwise, so one state per set equals one joint state.
  std::vector<nd::AdamState> adam(param_sets.size(), nd::AdamState(nd::AdamConfig{hp.learning_rate}));
  TrainingTrace trace;
  std::vector<std::size_t> order(n);
  nd::Tape tape;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(hp.seed, 1000 + epoch);
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += hp.batch_size) {
      const std::size_t stop = std::min(n, start + hp.batch_size);
      for (auto* ps : param_sets) ps->zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        tape.clear();
        nd::Var loss = loss_of(tape, order[b]);
        total += loss.value()[0];
        tape.backward(loss);
      }
      for (auto* ps : param_sets) {
        ps->scale_grad(1.0 / static_cast<double>(stop - start));
        for (const auto& [name, p] : *ps) {
          if (!p.grad.all_finite()) {
            throw numerical_error(std::string(what) + " diverged in epoch " + std::to_string(epoch + 1) +
                                  " (last finite epoch " + std::to_string(epoch) + "): non-finite gradient in '" +
                                  name + "'");
          }
        }
      }
      for (std::size_t k = 0; k < param_sets.size(); ++k) nd::adam_step(adam[k], *param_sets[k]);
    }
    const double mean_loss = total / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      throw numerical_error(std::string(what) + " diverged in epoch " + std::to_string(epoch + 1) +
                            " (last finite epoch " + std::to_string(epoch) + ")");
    }
    trace.train_loss.push_back(mean_loss);
    if (n_validation > 0) {
      double vtotal = 0.0;
      for (std::size_t i = 0; i < n_validation; ++i) vtotal += eval_of(i);
      trace.validation_loss.push_back(vtotal / static_cast<double>(n_validation));
    }
  }
  return trace;
}

void check_schema(const Dataset& data, const char* what) {
  for (const auto& s : data.samples) {
    if (s.frames.shape() != nd::Shape{data.schema.frames, data.schema.channels()}) {
      throw structural_error(std::string(what) + ": sample '" + s.id + "' has shape " +
                             nd::shape_string(s.frames.shape()) + ", schema expects " +
                             nd::shape_string({data.schema.frames, data.schema.channels()}));
    }
    if (!s.frames.all_finite()) {
      throw numerical_error(std::string(what) + ": sample '" + s.id + "' holds non-finite values");
    }
  }
}

}  // namespace

TrainedClassifier train_classifier(const Dataset& train, const ModelHyperparams& hp, ClassifierKind kind,
                                   const Dataset* validation) {
  check_schema(train, "train_classifier");
  const auto labels = train.labels();
  std::vector<std::size_t> val_labels;
  if (validation) {
    check_schema(*validation, "train_classifier");
    val_labels = validation->labels();
  }
  TrainedClassifier out{Classifier::create(kind, train.schema.frames, train.schema.channels(), hp), {}};
  Classifier& model = out.model;
  out.trace = fit(
      {&model.network().params()}, train.size(), hp.epochs, hp, "classifier training",
      [&](nd::Tape& tape, std::size_t i) {
        return nd::cross_entropy(model.forward_trainable(tape, tape.constant(train.samples[i].frames)), labels[i]);
      },
      [&](std::size_t i) {
        const auto p = model.predict_proba(validation->samples[i].frames);
        return nd::cross_entropy(p, val_labels[i]).loss;
      },
      validation ? validation->size() : 0);
  return out;
}

TrainedAutoencoder train_autoencoder(const Dataset& train, const ModelHyperparams& hp, const Dataset* validation) {
  check_schema(train, "train_autoencoder");
  if (validation) check_schema(*validation, "train_autoencoder");
  TrainedAutoencoder out{Autoencoder::create(train.schema.frames, train.schema.channels(), hp), {}};
  Autoencoder& ae = out.model;
  out.trace = fit(
      {&ae.encoder().params(), &ae.decoder().params()}, train.size(), hp.ae_epochs, hp, "autoencoder training",
      [&](nd::Tape& tape, std::size_t i) {
        const nd::Tensor& x = train.samples[i].frames;
        return nd::mse(ae.reconstruct_trainable(tape, tape.constant(x)), x);
      },
      [&](std::size_t i) {
        const nd::Tensor& x = validation->samples[i].frames;
        const nd::Tensor y = ae.reconstruct(x);
        double total = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) total += (y[k] - x[k]) * (y[k] - x[k]);
        return total / static_cast<double>(x.size());
      },
      validation ? validation->size() : 0);
  return out;
}

double reconstruction_rmse(const Autoencoder& ae, const Dataset& data) {
  if (data.samples.empty()) throw config_error("reconstruction_rmse: empty dataset");
  const std::size_t channels = data.schema.channels();
  std::vector<double> sq(channels, 0.0);
  std::size_t count = 0;
  for (const auto& s : data.samples) {
    const nd::Tensor y = ae.reconstruct(s.frames);
    for (std::size_t t = 0; t < s.frame_count(); ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = y(t, c) - s.frames(t, c);
        sq[c] += d * d;
      }
    }
    count += s.frame_count();
  }
  double total = 0.0;
  for (double v : sq) total += std::sqrt(v / static_cast<double>(count));
  return total / static_cast<double>(channels);
}

MajorityBaseline MajorityBaseline::fit(std::span<const std::size_t> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t l : labels) counts.at(l) += 1;
  return {counts[1] > counts[0] ? StrokeQuality::good : StrokeQuality::poor};
}

}  // namespace mg
