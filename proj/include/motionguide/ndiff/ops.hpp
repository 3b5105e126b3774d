#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "motionguide/ndiff/tape.hpp"

namespace mg::nd {

// Elementwise arithmetic used by losses and tests.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var sum(Var a);

/// y = x W^T + b. x is [in] or [n, in], W is [out, in], b is [out].
Var dense(Var x, Var weight, Var bias);

struct Conv1dSpec {
  std::size_t stride = 1;
  std::size_t padding = 0;  // zeros on both ends of the time axis
};

/// Cross-correlation over time. x is [T, Cin], W is [Cout, Cin, K], b is
/// [Cout]; result is [(T + 2p - K) / s + 1, Cout].
Var conv1d(Var x, Var weight, Var bias, Conv1dSpec spec = {});

Var relu(Var x);
Var tanh(Var x);
/// Normalizes over the last axis (rank 1 or rank 2).
Var softmax(Var x);

/// Averages windows along time: [T, C] -> [(T - window) / stride + 1, C].
/// window == T gives global average pooling.
Var mean_pool(Var x, std::size_t window, std::size_t stride);

/// Linear interpolation along time: [T, C] -> [T * factor, C]. Output step j
/// samples the input at (j + 0.5) / factor - 0.5, clamped to [0, T - 1].
Var upsample(Var x, std::size_t factor);

Var reshape(Var x, Shape shape);

/// Mean squared difference to a fixed target.
Var mse(Var x, const Tensor& target);

/// Probabilities below this are clamped before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// -ln p[target] for a probability vector ([C] or [1, C]). Clamping at the
/// floor is recorded on the tape as a floor event.
Var cross_entropy(Var probabilities, std::size_t target);

struct CrossEntropyValue {
  double loss = 0.0;
  bool floored = false;
};

/// Value-only cross-entropy on a probability vector.
CrossEntropyValue cross_entropy(std::span<const double> probabilities, std::size_t target);

}  // namespace mg::nd
