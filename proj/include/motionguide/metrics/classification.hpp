#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mg::metrics {

struct ClassificationScores {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;  // mean per-class recall
  double f1 = 0.0;                 // support-weighted mean of per-class F1
  double macro_f1 = 0.0;           // unweighted mean of per-class F1
  /// Classes whose recall or precision was undefined and counted as 0.
  std::vector<std::string> warnings;
};

/// Binary scores over class indices {0, 1}.
ClassificationScores classification_scores(std::span<const std::size_t> predictions,
                                            std::span<const std::size_t> labels);

}  // namespace mg::metrics
