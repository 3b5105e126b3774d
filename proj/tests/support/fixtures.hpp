#pragma once

// Shared hand-built instances.

#include <array>
#include <vector>

#include "motionguide/metrics/outliers.hpp"

namespace mg::testing {

/// 5 x 5 grid with spacing 0.1 at the origin plus one far point at (3, 3),
/// stored last.
inline metrics::PointSet cluster_with_outlier() {
  metrics::PointSet ps(2);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double p[2] = {0.1 * i, 0.1 * j};
      ps.add(p);
    }
  }
  const double far[2] = {3.0, 3.0};
  ps.add(far);
  return ps;
}

inline constexpr std::size_t kOutlierIndex = 25;

/// Five evenly spaced points from the grid centre (0.2, 0.2) to the far point.
inline std::vector<std::array<double, 2>> waypoints() {
  std::vector<std::array<double, 2>> out;
  for (int w = 0; w < 5; ++w) {
    const double a = w / 4.0;
    out.push_back({0.2 + a * 2.8, 0.2 + a * 2.8});
  }
  return out;
}

}  // namespace mg::testing
