#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "motionguide/dataset.hpp"
#include "motionguide/errors.hpp"
#include "motionguide/metrics/distances.hpp"
#include "motionguide/models.hpp"

namespace mg {

struct CFParams {
  StrokeQuality target = StrokeQuality::good;
  double learning_rate = 1e-2;
  std::size_t max_iter = 500;
  double tau = 0.5;

  void validate() const;
};

enum class CFMethod { latent, nn_l1, nn_l2, nn_dtw };
const char* to_string(CFMethod method) noexcept;
/// Accepts the CLI spellings latent, nn-l1, nn-l2 and nn-dtw.
CFMethod parse_cf_method(const std::string& text);
inline constexpr CFMethod kAllMethods[] = {CFMethod::latent, CFMethod::nn_l1, CFMethod::nn_l2, CFMethod::nn_dtw};

struct LossPoint {
  std::size_t iter = 0;
  double loss = 0.0;
};

struct CFResult {
  nd::Tensor counterfactual;
  bool valid = false;
  std::size_t iterations = 0;
  /// Target-class probability of the returned counterfactual.
  double final_prob = 0.0;
  std::vector<LossPoint> loss_trace;
  CFMethod method = CFMethod::latent;
  /// 1NN only: the chosen reference sample and its distance.
  std::string neighbor_id;
  double neighbor_distance = 0.0;
};

/// Raised when the latent loop meets a non-finite loss; carries the trace so far.
class CfAborted : public Error {
 public:
  CfAborted(const std::string& what, CFResult partial)
      : Error(ErrorCategory::numerical, what), partial_(std::move(partial)) {}
  const CFResult& partial() const noexcept { return partial_; }

 private:
  CFResult partial_;
};

/// Gradient descent with Adam on the latent code of x until the classifier
/// assigns the target class probability >= tau or the budget runs out. On
/// non-convergence the iterate with the highest target probability is
/// returned and flagged invalid.
CFResult latent_cf(const nd::Tensor& x, const CFParams& params, const Autoencoder& ae, const Classifier& c);

/// Reference samples the classifier predicts as the target class.
class NeighborPool {
 public:
  NeighborPool(const Dataset& reference, const Classifier& c, StrokeQuality target);

  std::size_t size() const noexcept { return candidates_.size(); }
  StrokeQuality target() const noexcept { return target_; }
  const std::vector<const MotionSample*>& candidates() const noexcept { return candidates_; }
  const std::vector<double>& target_probabilities() const noexcept { return probs_; }

 private:
  StrokeQuality target_;
  std::vector<const MotionSample*> candidates_;
  std::vector<double> probs_;
};

/// Nearest candidate under the method's raw-data distance; ties go to the
/// lowest sample id. Raises a no-candidate error on an empty pool.
CFResult nn_cf(const nd::Tensor& x, CFMethod method, const NeighborPool& pool);

/// Convenience overload building the pool on the fly.
CFResult nn_cf(const nd::Tensor& x, StrokeQuality target, CFMethod method, const Dataset& reference,
               const Classifier& c);

struct ExplainContext {
  CFParams params;
  const Autoencoder* autoencoder = nullptr;
  const Classifier* classifier = nullptr;
  const NeighborPool* pool = nullptr;  // required for 1NN methods
  std::size_t threads = 0;             // 0 picks the hardware concurrency
};

struct BatchItem {
  std::string id;
  std::optional<CFResult> result;
  std::string error;  // empty on success
  ErrorCategory error_category = ErrorCategory::numerical;
};

/// Explains every input independently. Output order matches input order and
/// failures are recorded per instance without stopping the batch.
std::vector<BatchItem> batch_explain(std::span<const MotionSample> inputs, CFMethod method,
                                     const ExplainContext& context);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace mg
