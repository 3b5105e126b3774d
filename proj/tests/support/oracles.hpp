#pragma once

// Test-side reference implementations. They share no code with the library.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "motionguide/cfengine.hpp"
#include "motionguide/rng.hpp"

namespace mg::testing {

inline double frame_cost(const nd::Tensor& x, std::size_t i, const nd::Tensor& y, std::size_t j) {
  double s = 0.0;
  for (std::size_t d = 0; d < x.shape()[1]; ++d) s += (x(i, d) - y(j, d)) * (x(i, d) - y(j, d));
  return std::sqrt(s);
}

/// Full (n+1) x (m+1) table with an infinite border.
inline double naive_dtw(const nd::Tensor& x, const nd::Tensor& y) {
  const std::size_t n = x.shape()[0], m = y.shape()[0];
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> D(n + 1, std::vector<double>(m + 1, inf));
  D[0][0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      D[i][j] = frame_cost(x, i - 1, y, j - 1) + std::min({D[i - 1][j - 1], D[i - 1][j], D[i][j - 1]});
    }
  }
  return D[n][m];
}

inline double naive_norm(const nd::Tensor& a, const nd::Tensor& b, int p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.data()[i] - b.data()[i]);
    acc = p == 1 ? acc + d : p == 2 ? acc + d * d : std::max(acc, d);
  }
  return p == 2 ? std::sqrt(acc) : acc;
}

struct ScanResult {
  std::string id;
  double distance = std::numeric_limits<double>::infinity();
};

/// Exhaustive scan over reference samples the classifier predicts as target.
inline ScanResult brute_force_nn(const nd::Tensor& x, CFMethod method, const Dataset& reference, const Classifier& c,
                                 StrokeQuality target) {
  ScanResult best;
  for (const auto& s : reference.samples) {
    if (c.predict(s.frames) != target) continue;
    double d = 0.0;
    if (method == CFMethod::nn_l1) d = naive_norm(x, s.frames, 1);
    if (method == CFMethod::nn_l2) d = naive_norm(x, s.frames, 2);
    if (method == CFMethod::nn_dtw) d = naive_dtw(x, s.frames);
    if (d < best.distance || (d == best.distance && s.id < best.id)) best = {s.id, d};
  }
  return best;
}

inline nd::Tensor random_frames(Rng& rng, std::size_t t, std::size_t d, double scale = 1.0) {
  nd::Tensor out({t, d});
  for (double& v : out.data()) v = scale * rng.normal();
  return out;
}

}  // namespace mg::testing
