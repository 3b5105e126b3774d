#include "motionguide/metrics/outliers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "motionguide/errors.hpp"
#include "motionguide/rng.hpp"

namespace mg::metrics {

PointSet PointSet::from_tensors(std::span<const nd::Tensor> tensors) {
  if (tensors.empty()) return {};
  PointSet set(tensors.front().size());
  for (const auto& t : tensors) set.add(t.data());
  return set;
}

void PointSet::add(std::span<const double> point) {
  if (dim_ == 0) dim_ = point.size();
  if (point.size() != dim_) {
    throw structural_error("point of dimension " + std::to_string(point.size()) + " added to a set of dimension " +
                           std::to_string(dim_));
  }
  data_.insert(data_.end(), point.begin(), point.end());
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------- LOF

LocalOutlierFactor::LocalOutlierFactor(PointSet reference, std::size_t k) : reference_(std::move(reference)), k_(k) {
  const std::size_t n = reference_.size();
  if (k_ == 0 || n < k_ + 1) {
    throw config_error("LOF needs at least k+1=" + std::to_string(k_ + 1) + " reference points, got " +
                       std::to_string(n));
  }
  std::vector<std::vector<Neighbor>> nn(n);
  k_distance_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    nn[i] = neighbors(reference_[i], i);
    k_distance_[i] = nn[i].back().distance;
  }
  lrd_.resize(n);
  for (std::size_t i = 0; i < n; ++i) lrd_[i] = local_reachability(nn[i]);
  reference_lof_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& nb : nn[i]) acc += lrd_[nb.index];
    reference_lof_[i] = acc / static_cast<double>(k_) / lrd_[i];
  }
}

std::vector<LocalOutlierFactor::Neighbor> LocalOutlierFactor::neighbors(std::span<const double> x,
                                                                        std::size_t skip) const {
  std::vector<Neighbor> all;
  all.reserve(reference_.size());
  for (std::size_t j = 0; j < reference_.size(); ++j) {
    if (j != skip) all.push_back({j, euclidean(x, reference_[j])});
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k_), all.end(), closer);
  all.resize(k_);
  return all;
}

double LocalOutlierFactor::local_reachability(const std::vector<Neighbor>& nn) const {
  double reach = 0.0;
  for (const auto& nb : nn) reach += std::max(k_distance_[nb.index], nb.distance);
  // The offset keeps duplicate-heavy neighbourhoods finite.
  return 1.0 / (reach / static_cast<double>(nn.size()) + 1e-10);
}

double LocalOutlierFactor::score(std::span<const double> x) const {
  if (x.size() != reference_.dim()) throw structural_error("LOF query has the wrong dimension");
  const auto nn = neighbors(x, reference_.size());
  const double lrd = local_reachability(nn);
  double acc = 0.0;
  for (const auto& nb : nn) acc += lrd_[nb.index];
  return acc / static_cast<double>(k_) / lrd;
}

// ---------------------------------------------------------------- isolation forest

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n - 1);
  const double harmonic = std::log(m) + std::numbers::egamma;
  return 2.0 * harmonic - 2.0 * m / static_cast<double>(n);
}

IsolationForest::IsolationForest(const PointSet& reference, std::size_t n_trees, std::size_t subsample,
                                 std::uint64_t seed) {
  const std::size_t n = reference.size();
  if (n < 2) throw config_error("isolation forest needs at least 2 reference points");
  if (n_trees == 0) throw config_error("isolation forest needs at least one tree");
  subsample_ = std::min(subsample, n);
  const auto limit = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(subsample_))));
  std::vector<std::size_t> all(n);
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng rng = Rng::derive(seed, t);
    std::iota(all.begin(), all.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(all));
    std::vector<std::size_t> idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(subsample_));
    roots_.push_back(build(reference, idx, 0, idx.size(), 0, limit, rng));
  }
}

std::int32_t IsolationForest::build(const PointSet& data, std::vector<std::size_t>& idx, std::size_t begin,
                                     std::size_t end, std::size_t depth, std::size_t limit, Rng& rng) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{});
  const std::size_t count = end - begin;
  nodes_[id].size = count;
  if (depth >= limit || count <= 1) return id;

  // Random feature with a non-degenerate range; give up after dim tries.
  const std::size_t dim = data.dim();
  for (std::size_t attempt = 0; attempt < dim; ++attempt) {
    const std::size_t f = rng.below(dim);
    double lo = data[idx[begin]][f], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = std::min(lo, data[idx[i]][f]);
      hi = std::max(hi, data[idx[i]][f]);
    }
    if (!(hi > lo)) continue;
    const double split = rng.uniform(lo, hi);
    const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                    idx.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::size_t i) { return data[i][f] < split; });
    const auto m = static_cast<std::size_t>(mid - idx.begin());
    nodes_[id].feature = f;
    nodes_[id].threshold = split;
    const std::int32_t left = build(data, idx, begin, m, depth + 1, limit, rng);
    const std::int32_t right = build(data, idx, m, end, depth + 1, limit, rng);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }
  return id;
}

double IsolationForest::path_length(std::span<const double> x, std::int32_t node, std::size_t depth) const {
  const Node& nd = nodes_[static_cast<std::size_t>(node)];
  if (nd.left < 0) return static_cast<double>(depth) + average_path_length(nd.size);
  return path_length(x, x[nd.feature] < nd.threshold ? nd.left : nd.right, depth + 1);
}

double IsolationForest::score(std::span<const double> x) const {
  double total = 0.0;
  for (std::int32_t root : roots_) total += path_length(x, root, 0);
  const double mean_depth = total / static_cast<double>(roots_.size());
  return std::pow(2.0, -mean_depth / average_path_length(subsample_));
}

// ---------------------------------------------------------------- one-class SVM

namespace {

double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::exp(-gamma * acc);
}

// Euclidean projection onto {0 <= a_i <= cap, sum a_i = 1} by bisection on
// the shift tau in a_i = clamp(v_i - tau, 0, cap).
void project_capped_simplex(std::vector<double>& v, double cap) {
  auto mass = [&](double tau) {
    double s = 0.0;
    for (double x : v) s += std::clamp(x - tau, 0.0, cap);
    return s;
  };
  double lo = *std::min_element(v.begin(), v.end()) - cap;
  double hi = *std::max_element(v.begin(), v.end());
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  const double tau = 0.5 * (lo + hi);
  for (double& x : v) x = std::clamp(x - tau, 0.0, cap);
}

}  // namespace

OneClassSvm::OneClassSvm(PointSet reference, double gamma, double nu, std::size_t iterations)
    : reference_(std::move(reference)), gamma_(gamma) {
  const std::size_t n = reference_.size();
  if (n < 2) throw config_error("one-class SVM needs at least 2 reference points");
  if (!(nu > 0.0 && nu <= 1.0)) throw config_error("one-class SVM nu must lie in (0, 1]");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw config_error("one-class SVM gamma must be positive");

  std::vector<double> kernel(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    kernel[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      kernel[i * n + j] = kernel[j * n + i] = rbf(reference_[i], reference_[j], gamma_);
    }
  }
  auto multiply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += kernel[i * n + j] * v[j];
      out[i] = acc;
    }
  };

  // Power iteration for the Lipschitz constant of the gradient.
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n))), kv(n);
  double lambda = 1.0;
  for (int it = 0; it < 100; ++it) {
    multiply(v, kv);
    double norm = 0.0;
    for (double x : kv) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    lambda = norm;
    for (std::size_t i = 0; i < n; ++i) v[i] = kv[i] / norm;
  }
  const double step = 1.0 / lambda;
  const double cap = 1.0 / (nu * static_cast<double>(n));

  alpha_.assign(n, 1.0 / static_cast<double>(n));
  std::vector<double> grad(n);
  for (std::size_t it = 0; it < iterations; ++it) {
    multiply(alpha_, grad);
    for (std::size_t i = 0; i < n; ++i) alpha_[i] -= step * grad[i];
    project_capped_simplex(alpha_, cap);
  }

  // rho from the margin support vectors (0 < a_i < cap); fall back to all
  // support vectors when none is strictly inside the box.
  multiply(alpha_, grad);
  const double tol = 1e-9 * cap;
  double free_sum = 0.0, sv_sum = 0.0;
  std::size_t free_count = 0, sv_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha_[i] > tol) {
      sv_sum += grad[i];
      ++sv_count;
      if (alpha_[i] < cap - tol) {
        free_sum += grad[i];
        ++free_count;
      }
    }
  }
  rho_ = free_count ? free_sum / static_cast<double>(free_count) : sv_sum / static_cast<double>(sv_count);
}

double OneClassSvm::score(std::span<const double> x) const {
  if (x.size() != reference_.dim()) throw structural_error("OCSVM query has the wrong dimension");
  double acc = 0.0;
  for (std::size_t i = 0; i < reference_.size(); ++i) {
    if (alpha_[i] != 0.0) acc += alpha_[i] * rbf(reference_[i], x, gamma_);
  }
  return rho_ - acc;
}

// ---------------------------------------------------------------- calibration

Calibration Calibration::fit(std::span<const double> reference_scores) {
  if (reference_scores.empty()) throw config_error("calibration needs reference scores");
  const auto [lo, hi] = std::minmax_element(reference_scores.begin(), reference_scores.end());
  return {*lo, *hi};
}

double Calibration::operator()(double raw) const {
  if (!(high > low)) return raw <= low ? 0.0 : 1.0;
  return std::clamp((raw - low) / (high - low), 0.0, 1.0);
}

OutlierModels fit_outlier_models(const PointSet& reference, const OutlierConfig& config) {
  const std::size_t n = reference.size();
  if (n < 3) throw config_error("outlier models need at least 3 reference samples, got " + std::to_string(n));
  OutlierModels m;
  const std::size_t k = std::min(config.max_neighbors, n - 1);
  m.lof = LocalOutlierFactor(reference, k);
  m.iforest = IsolationForest(reference, config.n_trees, config.max_subsample, config.seed);

  double mean = 0.0, count = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : reference[i]) mean += v;
  }
  count = static_cast<double>(n * reference.dim());
  mean /= count;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : reference[i]) var += (v - mean) * (v - mean);
  }
  var /= count;
  const double gamma = var > 0.0 ? 1.0 / (static_cast<double>(reference.dim()) * var) : 1.0;
  m.ocsvm = OneClassSvm(reference, gamma, config.nu, config.svm_iterations);

  std::vector<double> lof_raw = m.lof.reference_scores(), if_raw(n), svm_raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    if_raw[i] = m.iforest.score(reference[i]);
    svm_raw[i] = m.ocsvm.score(reference[i]);
  }
  m.lof_calibration = Calibration::fit(lof_raw);
  m.iforest_calibration = Calibration::fit(if_raw);
  m.ocsvm_calibration = Calibration::fit(svm_raw);
  m.reference.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.reference[i] = {m.lof_calibration(lof_raw[i]), m.iforest_calibration(if_raw[i]),
                      m.ocsvm_calibration(svm_raw[i])};
  }
  return m;
}

PlausibilityScores plausibility_scores(std::span<const double> x, const OutlierModels& models) {
  return {models.lof_calibration(models.lof.score(x)), models.iforest_calibration(models.iforest.score(x)),
          models.ocsvm_calibration(models.ocsvm.score(x))};
}

PlausibilityScores plausibility_scores(const nd::Tensor& x, const OutlierModels& models) {
  return plausibility_scores(x.data(), models);
}

}  // namespace mg::metrics
