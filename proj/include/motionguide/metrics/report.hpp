#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "motionguide/cfengine.hpp"

namespace mg::metrics {

enum class Direction { higher_better, lower_better };
const char* arrow(Direction d) noexcept;

/// Mean and sample standard deviation (n - 1 denominator; 0 when n = 1).
struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

Aggregate aggregate(std::span<const double> values);

/// Per-instance metric values in insertion order of metric names.
class MetricReport {
 public:
  void declare(const std::string& metric, Direction direction);
  void add(const std::string& metric, double value);

  const std::vector<std::string>& metrics() const noexcept { return order_; }
  const std::vector<double>& values(const std::string& metric) const;
  Direction direction(const std::string& metric) const;
  Aggregate summary(const std::string& metric) const { return aggregate(values(metric)); }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::vector<double>> values_;
  std::map<std::string, Direction> directions_;
};

/// Fraction of results whose counterfactual the classifier assigns to the
/// target class by argmax. Returns 0 for an empty list.
double validity(std::span<const CFResult> results, const Classifier& c, StrokeQuality target);

}  // namespace mg::metrics
