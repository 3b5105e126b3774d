#include "motionguide/metrics/classification.hpp"

#include <array>

#include "motionguide/errors.hpp"

namespace mg::metrics {

ClassificationScores classification_scores(std::span<const std::size_t> predictions,
                                            std::span<const std::size_t> labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw config_error("classification_scores needs equal-length, non-empty prediction and label vectors");
  }
  constexpr std::size_t K = 2;
  std::array<std::array<std::size_t, K>, K> confusion{};  // [label][prediction]
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= K || predictions[i] >= K) throw config_error("classification_scores expects binary classes");
    confusion[labels[i]][predictions[i]] += 1;
  }

  ClassificationScores s;
  const double n = static_cast<double>(labels.size());
  std::size_t correct = 0;
  double recall_sum = 0.0, f1_sum = 0.0, f1_weighted = 0.0;
  for (std::size_t c = 0; c < K; ++c) {
    correct += confusion[c][c];
    const std::size_t support = confusion[c][0] + confusion[c][1];
    const std::size_t predicted = confusion[0][c] + confusion[1][c];
    const double tp = static_cast<double>(confusion[c][c]);
    double recall = 0.0, precision = 0.0;
    if (support == 0) {
      s.warnings.push_back("class " + std::to_string(c) + " absent from labels; recall set to 0");
    } else {
      recall = tp / static_cast<double>(support);
    }
    if (predicted == 0) {
      s.warnings.push_back("class " + std::to_string(c) + " never predicted; precision set to 0");
    } else {
      precision = tp / static_cast<double>(predicted);
    }
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    recall_sum += recall;
    f1_sum += f1;
    f1_weighted += f1 * static_cast<double>(support) / n;
  }
  s.accuracy = static_cast<double>(correct) / n;
  s.balanced_accuracy = recall_sum / K;
  s.macro_f1 = f1_sum / K;
  s.f1 = f1_weighted;
  return s;
}

}  // namespace mg::metrics
