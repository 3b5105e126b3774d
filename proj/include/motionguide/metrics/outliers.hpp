#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "motionguide/ndiff/tensor.hpp"
#include "motionguide/rng.hpp"

namespace mg::metrics {

/// Row-major set of equal-length points.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}

  /// Flattens each [T, D] tensor to one T*D point.
  static PointSet from_tensors(std::span<const nd::Tensor> tensors);

  void add(std::span<const double> point);
  std::size_t size() const noexcept { return dim_ ? data_.size() / dim_ : 0; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

double euclidean(std::span<const double> a, std::span<const double> b);

/// Local outlier factor against a fixed reference set.
class LocalOutlierFactor {
 public:
  LocalOutlierFactor() = default;
  LocalOutlierFactor(PointSet reference, std::size_t k);

  /// LOF of a new point; its neighbours are drawn from the whole reference set.
  double score(std::span<const double> x) const;
  /// LOF of every reference point with itself excluded from its neighbourhood.
  const std::vector<double>& reference_scores() const noexcept { return reference_lof_; }
  std::size_t k() const noexcept { return k_; }

 private:
  struct Neighbor {
    std::size_t index;
    double distance;
  };
  std::vector<Neighbor> neighbors(std::span<const double> x, std::size_t skip) const;
  double local_reachability(const std::vector<Neighbor>& nn) const;

  PointSet reference_;
  std::size_t k_ = 0;
  std::vector<double> k_distance_;
  std::vector<double> lrd_;
  std::vector<double> reference_lof_;
};

/// Isolation forest with the standard 2^(-E[h(x)] / c(psi)) anomaly score.
class IsolationForest {
 public:
  IsolationForest() = default;
  IsolationForest(const PointSet& reference, std::size_t n_trees, std::size_t subsample, std::uint64_t seed);

  double score(std::span<const double> x) const;
  std::size_t tree_count() const noexcept { return roots_.size(); }

 private:
  struct Node {
    std::size_t feature = 0;
    double threshold = 0.0;
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    std::size_t size = 0;    // points reaching a leaf
  };
  std::int32_t build(const PointSet& data, std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                     std::size_t depth, std::size_t limit, Rng& rng);
  double path_length(std::span<const double> x, std::int32_t node, std::size_t depth) const;

  std::vector<Node> nodes_;
  std::vector<std::int32_t> roots_;
  std::size_t subsample_ = 0;
};

/// Average path length of an unsuccessful BST search over n points.
double average_path_length(std::size_t n);

/// One-class SVM with an RBF kernel. The dual
///   min 1/2 a^T K a  s.t.  0 <= a_i <= 1 / (nu n),  sum a_i = 1
/// is solved by projected gradient descent with step 1 / lambda_max(K).
class OneClassSvm {
 public:
  OneClassSvm() = default;
  OneClassSvm(PointSet reference, double gamma, double nu, std::size_t iterations);

  /// rho - sum_i a_i k(x_i, x): positive outside the learned support.
  double score(std::span<const double> x) const;
  double decision(std::span<const double> x) const { return -score(x); }
  double gamma() const noexcept { return gamma_; }
  double rho() const noexcept { return rho_; }
  const std::vector<double>& coefficients() const noexcept { return alpha_; }

 private:
  PointSet reference_;
  std::vector<double> alpha_;
  double gamma_ = 0.0;
  double rho_ = 0.0;
};

struct OutlierConfig {
  std::size_t max_neighbors = 20;  // LOF k = min(max_neighbors, n - 1)
  std::size_t n_trees = 100;
  std::size_t max_subsample = 256;  // psi = min(max_subsample, n)
  double nu = 0.1;
  std::size_t svm_iterations = 1000;
  std::uint64_t seed = 7;
};

/// Min-max map of a raw score onto [0, 1] using the reference set's own
/// scores. Out-of-range scores are clamped.
struct Calibration {
  double low = 0.0;
  double high = 0.0;

  static Calibration fit(std::span<const double> reference_scores);
  double operator()(double raw) const;
};

struct PlausibilityScores {
  double lof = 0.0;
  double iforest = 0.0;
  double ocsvm = 0.0;
};

/// The three detectors fitted to target-class reference points. Immutable
/// after construction.
struct OutlierModels {
  LocalOutlierFactor lof;
  IsolationForest iforest;
  OneClassSvm ocsvm;
  Calibration lof_calibration;
  Calibration iforest_calibration;
  Calibration ocsvm_calibration;
  /// Calibrated in-sample scores of the reference points.
  std::vector<PlausibilityScores> reference;
};

/// gamma = 1 / (dim * var) where var is the variance of all reference values.
OutlierModels fit_outlier_models(const PointSet& reference, const OutlierConfig& config = {});

/// Calibrated scores in [0, 1]; lower is more plausible.
PlausibilityScores plausibility_scores(std::span<const double> x, const OutlierModels& models);
PlausibilityScores plausibility_scores(const nd::Tensor& x, const OutlierModels& models);

}  // namespace mg::metrics
