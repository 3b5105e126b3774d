#include "motionguide/cfengine.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "motionguide/ndiff/adam.hpp"
#include "motionguide/ndiff/ops.hpp"

namespace mg {

void CFParams::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw config_error("counterfactual learning rate must be positive");
  }
  if (!(tau > 0.0 && tau < 1.0)) throw config_error("tau must lie in (0, 1)");
}

const char* to_string(CFMethod method) noexcept {
  switch (method) {
    case CFMethod::latent: return "latent";
    case CFMethod::nn_l1: return "nn-l1";
    case CFMethod::nn_l2: return "nn-l2";
    case CFMethod::nn_dtw: return "nn-dtw";
  }
  return "?";
}

CFMethod parse_cf_method(const std::string& text) {
  for (CFMethod m : kAllMethods) {
    if (text == to_string(m)) return m;
  }
  throw config_error("unknown method '" + text + "' (expected latent, nn-l1, nn-l2 or nn-dtw)");
}

namespace {

struct LatentEval {
  double loss;
  double prob;
};

LatentEval evaluate(nd::Parameter& z, const Autoencoder& ae, const Classifier& c, std::size_t target) {
  nd::Tape tape;
  nd::Var code = tape.param(z);
  nd::Var probs = c.forward(tape, ae.decode(tape, code));
  nd::Var loss = nd::cross_entropy(probs, target);
  tape.backward(loss);
  return {loss.value().data()[0], probs.value().data()[target]};
}

}  // namespace

CFResult latent_cf(const nd::Tensor& x, const CFParams& params, const Autoencoder& ae, const Classifier& c) {
  params.validate();
  const nd::Shape expected{ae.frames(), ae.channels()};
  if (x.shape() != expected) {
    throw structural_error("instance shape " + nd::shape_string(x.shape()) + " does not match the model schema " +
                           nd::shape_string(expected));
  }
  const auto target = class_index(params.target);

  nd::ParameterSet latent;
  nd::Parameter& z = latent.add("z", ae.encode(x));
  nd::AdamState adam(nd::AdamConfig{.learning_rate = params.learning_rate});

  CFResult result;
  result.method = CFMethod::latent;
  auto abort_if_nonfinite = [&](const LatentEval& e) {
    if (!std::isfinite(e.loss)) {
      result.counterfactual = ae.decode(z.value);
      throw CfAborted("non-finite counterfactual loss at iteration " + std::to_string(result.iterations),
                      result);
    }
  };

  latent.zero_grad();
  LatentEval current = evaluate(z, ae, c, target);
  result.loss_trace.push_back({0, current.loss});
  abort_if_nonfinite(current);
  nd::Tensor best_code = z.value;
  double best_prob = current.prob;

  while (current.prob < params.tau && result.iterations < params.max_iter) {
    nd::adam_step(adam, latent);
    ++result.iterations;
    latent.zero_grad();
    current = evaluate(z, ae, c, target);
    result.loss_trace.push_back({result.iterations, current.loss});
    abort_if_nonfinite(current);
    if (current.prob > best_prob) {
      best_prob = current.prob;
      best_code = z.value;
    }
  }

  result.counterfactual = ae.decode(current.prob >= params.tau ? z.value : best_code);
  if (!result.counterfactual.all_finite()) throw numerical_error("decoded counterfactual is not finite");
  result.final_prob = c.predict_proba(result.counterfactual)[target];
  result.valid = result.final_prob >= params.tau;
  return result;
}

NeighborPool::NeighborPool(const Dataset& reference, const Classifier& c, StrokeQuality target) : target_(target) {
  const auto t = class_index(target);
  for (const auto& s : reference.samples) {
    const Probabilities p = c.predict_proba(s.frames);
    if (argmax(p) == target) {
      candidates_.push_back(&s);
      probs_.push_back(p[t]);
    }
  }
}

CFResult nn_cf(const nd::Tensor& x, CFMethod method, const NeighborPool& pool) {
  if (method == CFMethod::latent) throw config_error("nn_cf needs a 1NN method");
  if (pool.size() == 0) {
    throw Error(ErrorCategory::no_candidate,
                std::string("no reference sample is predicted as ") + to_string(pool.target()));
  }
  const auto inf = std::numeric_limits<double>::infinity();
  double best = inf;
  std::size_t best_index = 0;
  bool found = false;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const MotionSample& s = *pool.candidates()[i];
    if (s.frames.shape()[1] != x.shape()[1]) throw structural_error("reference sample " + s.id + " has the wrong width");
    double d = 0.0;
    switch (method) {
      case CFMethod::nn_l1: d = metrics::proximity(x, s.frames, metrics::Norm::l1); break;
      case CFMethod::nn_l2: d = metrics::proximity(x, s.frames, metrics::Norm::l2); break;
      default: d = metrics::dtw(x, s.frames, best); break;
    }
    const bool better = d < best || (d == best && (!found || s.id < pool.candidates()[best_index]->id));
    if (better && std::isfinite(d)) {
      best = d;
      best_index = i;
      found = true;
    }
  }
  if (!found) throw numerical_error("every 1NN distance was non-finite");

  CFResult result;
  result.method = method;
  result.counterfactual = pool.candidates()[best_index]->frames;
  result.final_prob = pool.target_probabilities()[best_index];
  result.valid = true;
  result.neighbor_id = pool.candidates()[best_index]->id;
  result.neighbor_distance = best;
  return result;
}

CFResult nn_cf(const nd::Tensor& x, StrokeQuality target, CFMethod method, const Dataset& reference,
               const Classifier& c) {
  return nn_cf(x, method, NeighborPool(reference, c, target));
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::vector<BatchItem> batch_explain(std::span<const MotionSample> inputs, CFMethod method,
                                     const ExplainContext& context) {
  if (method == CFMethod::latent && (!context.autoencoder || !context.classifier)) {
    throw config_error("latent counterfactuals need an autoencoder and a classifier");
  }
  if (method != CFMethod::latent && !context.pool) throw config_error("1NN counterfactuals need a neighbour pool");

  std::vector<BatchItem> items(inputs.size());
  parallel_for(inputs.size(), context.threads, [&](std::size_t i) {
    BatchItem& item = items[i];
    item.id = inputs[i].id;
    try {
      item.result = method == CFMethod::latent
                        ? latent_cf(inputs[i].frames, context.params, *context.autoencoder, *context.classifier)
                        : nn_cf(inputs[i].frames, method, *context.pool);
    } catch (const Error& e) {
      item.error = inputs[i].id + ": " + e.what();
      item.error_category = e.category();
    } catch (const std::exception& e) {
      item.error = inputs[i].id + ": " + e.what();
    }
  });
  return items;
}

}  // namespace mg
