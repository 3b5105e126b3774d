#include "motionguide/metrics/report.hpp"

#include <cmath>

namespace mg::metrics {

const char* arrow(Direction d) noexcept { return d == Direction::higher_better ? "↑" : "↓"; }

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.n = values.size();
  if (a.n == 0) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(a.n);
  if (a.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(a.n - 1));
  }
  return a;
}

void MetricReport::declare(const std::string& metric, Direction direction) {
  if (directions_.emplace(metric, direction).second) {
    order_.push_back(metric);
    values_[metric];
  }
}

void MetricReport::add(const std::string& metric, double value) {
  auto it = values_.find(metric);
  if (it == values_.end()) throw config_error("metric '" + metric + "' was not declared");
  it->second.push_back(value);
}

const std::vector<double>& MetricReport::values(const std::string& metric) const {
  auto it = values_.find(metric);
  if (it == values_.end()) throw config_error("unknown metric '" + metric + "'");
  return it->second;
}

Direction MetricReport::direction(const std::string& metric) const {
  auto it = directions_.find(metric);
  if (it == directions_.end()) throw config_error("unknown metric '" + metric + "'");
  return it->second;
}

double validity(std::span<const CFResult> results, const Classifier& c, StrokeQuality target) {
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : results) hits += argmax(c.predict_proba(r.counterfactual)) == target;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

}  // namespace mg::metrics
