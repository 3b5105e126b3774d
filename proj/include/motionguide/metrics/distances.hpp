#pragma once

#include <limits>

#include "motionguide/ndiff/tensor.hpp"

namespace mg::metrics {

enum class Norm { l1, l2, linf };

/// Norm of the flattened difference x' - x. Shapes must match.
double proximity(const nd::Tensor& x, const nd::Tensor& x_prime, Norm norm);

/// Euclidean distance between frame a of x and frame b of y.
double frame_distance(const nd::Tensor& x, std::size_t a, const nd::Tensor& y, std::size_t b);

/// Unconstrained DTW over frames ([T, D] each, T may differ) with Euclidean
/// ground cost and steps {match, insertion, deletion}.
///
/// If every cell of some row exceeds `abandon_above`, the alignment cannot
/// finish at or below it and +infinity is returned early.
double dtw(const nd::Tensor& x, const nd::Tensor& y,
           double abandon_above = std::numeric_limits<double>::infinity());

}  // namespace mg::metrics
