#include "motionguide/metrics/distances.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "motionguide/errors.hpp"

namespace mg::metrics {

double proximity(const nd::Tensor& x, const nd::Tensor& x_prime, Norm norm) {
  if (x.shape() != x_prime.shape()) {
    throw structural_error("proximity: shapes " + nd::shape_string(x.shape()) + " and " +
                           nd::shape_string(x_prime.shape()) + " differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::abs(x_prime[i] - x[i]);
    switch (norm) {
      case Norm::l1: acc += d; break;
      case Norm::l2: acc += d * d; break;
      case Norm::linf: acc = std::max(acc, d); break;
    }
  }
  return norm == Norm::l2 ? std::sqrt(acc) : acc;
}

double frame_distance(const nd::Tensor& x, std::size_t a, const nd::Tensor& y, std::size_t b) {
  const std::size_t d = x.dim(1);
  const double* xa = x.data().data() + a * d;
  const double* yb = y.data().data() + b * d;
  double acc = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double diff = xa[c] - yb[c];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

double dtw(const nd::Tensor& x, const nd::Tensor& y, double abandon_above) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) == 0 || y.dim(0) == 0) {
    throw structural_error("dtw: both sequences need at least one frame");
  }
  if (x.dim(1) != y.dim(1)) {
    throw structural_error("dtw: frame widths " + std::to_string(x.dim(1)) + " and " + std::to_string(y.dim(1)) +
                           " differ");
  }
  const std::size_t n = x.dim(0), m = y.dim(0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Two rolling rows; column 0 is the border.
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    double row_min = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = best + frame_distance(x, i - 1, y, j - 1);
      row_min = std::min(row_min, cur[j]);
    }
    if (row_min > abandon_above) return inf;
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace mg::metrics
