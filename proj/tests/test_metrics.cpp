#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "motionguide/metrics/classification.hpp"
#include "motionguide/metrics/distances.hpp"
#include "motionguide/metrics/frechet.hpp"
#include "motionguide/metrics/outliers.hpp"
#include "motionguide/metrics/report.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mg;
using namespace mg::metrics;
using nd::Tensor;

TEST_CASE("classification scores on small label vectors") {
  const std::vector<std::size_t> pred{1, 1, 0, 0}, truth{1, 0, 1, 0};
  const auto s = classification_scores(pred, truth);
  CHECK(s.accuracy == 0.5);
  CHECK(s.balanced_accuracy == 0.5);
  CHECK(s.f1 == doctest::Approx(0.5));
  CHECK(s.macro_f1 == doctest::Approx(0.5));

  std::vector<std::size_t> labels(10, 0), majority(10, 0);
  for (std::size_t i = 6; i < 10; ++i) labels[i] = 1;
  const auto m = classification_scores(majority, labels);
  CHECK(m.accuracy == doctest::Approx(0.6));
  CHECK(m.balanced_accuracy == 0.5);
  CHECK(m.macro_f1 == doctest::Approx(0.375));       // (0.75 + 0) / 2
  CHECK(m.f1 == doctest::Approx(0.6 * 0.75));
  CHECK(m.warnings.size() == 1);

  CHECK_THROWS_AS(classification_scores(std::vector<std::size_t>{0}, std::vector<std::size_t>{}), Error);
  CHECK_THROWS_AS(classification_scores(std::vector<std::size_t>{2}, std::vector<std::size_t>{0}), Error);
}

TEST_CASE("weighted F1 weighs classes by support") {
  // class 0: tp 3 fp 1 fn 0 -> F1 6/7; class 1: tp 0 fp 0 fn 1 -> 0
  const std::vector<std::size_t> pred{0, 0, 0, 0}, truth{0, 0, 0, 1};
  const auto s = classification_scores(pred, truth);
  CHECK(s.f1 == doctest::Approx(0.75 * 6.0 / 7.0));
  CHECK(s.macro_f1 == doctest::Approx(0.5 * 6.0 / 7.0));
}

TEST_CASE("proximity norms") {
  const Tensor x = Tensor::matrix(1, 3, {0, 0, 0});
  const Tensor y = Tensor::matrix(1, 3, {1, -2, 3});
  CHECK(proximity(x, y, Norm::l1) == 6.0);
  CHECK(proximity(x, y, Norm::l2) == doctest::Approx(std::sqrt(14.0)).epsilon(1e-15));
  CHECK(proximity(x, y, Norm::linf) == 3.0);
  CHECK(proximity(y, y, Norm::l2) == 0.0);
  CHECK_THROWS_AS(proximity(x, Tensor::matrix(3, 1, {1, 2, 3}), Norm::l1), Error);
}

TEST_CASE("dtw hand case and identity") {
  const Tensor a = Tensor::matrix(3, 1, {0, 0, 1});
  const Tensor b = Tensor::matrix(3, 1, {0, 1, 1});
  CHECK(dtw(a, b) == 0.0);
  CHECK(proximity(a, b, Norm::l1) == 1.0);
  CHECK(dtw(a, a) == 0.0);
  CHECK_THROWS_AS(dtw(Tensor({0, 1}), a), Error);
  CHECK_THROWS_AS(dtw(a, Tensor::matrix(1, 2, {0, 0})), Error);
}

TEST_CASE("dtw equals the naive full table on random pairs") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(6);
    const Tensor x = testing::random_frames(rng, 1 + rng.below(20), d);
    const Tensor y = testing::random_frames(rng, 1 + rng.below(20), d);
    CHECK(dtw(x, y) == testing::naive_dtw(x, y));
    CHECK(dtw(x, y) == dtw(y, x));
  }
}

TEST_CASE("dtw early abandon never changes a result under the bound") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = testing::random_frames(rng, 12, 3);
    const Tensor y = testing::random_frames(rng, 12, 3);
    const double exact = testing::naive_dtw(x, y);
    CHECK(dtw(x, y, exact) == exact);
    CHECK(dtw(x, y, exact * 1.5) == exact);
    const double abandoned = dtw(x, y, exact * 0.5);
    CHECK((std::isinf(abandoned) || abandoned == exact));
  }
}

TEST_CASE("frechet 1-D closed forms") {
  auto g = [](double mu, double var) {
    Gaussian out;
    out.mean = Eigen::VectorXd::Constant(1, mu);
    out.covariance = Eigen::MatrixXd::Constant(1, 1, var);
    return out;
  };
  CHECK(frechet_gaussian(g(0, 1), g(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(frechet_gaussian(g(0, 1), g(0, 4)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(frechet_gaussian(g(0, 1), g(0, 1))) < 1e-12);

  // Two frames of +-a give sample variance 2a^2 = 1.
  const double a = 1.0 / std::sqrt(2.0);
  const Tensor n01 = Tensor::matrix(2, 1, {-a, a});
  const Tensor n11 = Tensor::matrix(2, 1, {1 - a, 1 + a});
  const Tensor n04 = Tensor::matrix(2, 1, {-2 * a, 2 * a});
  CHECK(std::abs(frechet_distance(n01, n11, FrechetMode::pose, 0.0) - 1.0) < 1e-9);
  CHECK(std::abs(frechet_distance(n01, n04, FrechetMode::pose, 0.0) - 1.0) < 1e-9);
}

TEST_CASE("frechet identity, symmetry and frame requirements") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = testing::random_frames(rng, 30, 4);
    const Tensor y = testing::random_frames(rng, 30, 4, 2.0);
    for (FrechetMode mode : {FrechetMode::pose, FrechetMode::motion}) {
      CHECK(frechet_distance(x, x, mode) < 1e-9);
      CHECK(std::abs(frechet_distance(x, y, mode) - frechet_distance(y, x, mode)) < 1e-9);
      CHECK(frechet_distance(x, y, mode) > 0.0);
    }
  }
  CHECK_THROWS_AS(frechet_distance(Tensor::matrix(1, 1, {0}), Tensor::matrix(1, 1, {0}), FrechetMode::pose), Error);
  CHECK_THROWS_AS(frechet_distance(Tensor::matrix(2, 1, {0, 1}), Tensor::matrix(2, 1, {0, 1}), FrechetMode::motion),
                  Error);
}

TEST_CASE("frechet is symmetric on random PSD Gaussians") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(6));
    auto random_gaussian = [&] {
      Gaussian g;
      g.mean = Eigen::VectorXd(d);
      Eigen::MatrixXd m(d, d);
      for (int i = 0; i < d; ++i) {
        g.mean(i) = rng.normal();
        for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
      }
      g.covariance = m * m.transpose();
      return g;
    };
    const Gaussian a = random_gaussian(), b = random_gaussian();
    CHECK(std::abs(frechet_gaussian(a, b) - frechet_gaussian(b, a)) < 1e-9);
    CHECK(frechet_gaussian(a, b) >= 0.0);
  }
}

TEST_CASE("psd_sqrt squares back") {
  Eigen::MatrixXd m(2, 2);
  m << 4, 1, 1, 3;
  const Eigen::MatrixXd r = psd_sqrt(m);
  CHECK((r * r - m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("local outlier factor on the hand instance") {
  const PointSet ps = testing::cluster_with_outlier();
  const LocalOutlierFactor lof(ps, 20);
  const double duplicate[2] = {0.2, 0.2};
  CHECK(lof.score(duplicate) >= 0.8);
  CHECK(lof.score(duplicate) <= 1.2);
  const double far[2] = {3.0, 3.0};
  CHECK(lof.score(far) > 1.5);
  CHECK(lof.reference_scores()[testing::kOutlierIndex] > 1.5);
  CHECK_THROWS_AS(LocalOutlierFactor(ps, 26), Error);
}

TEST_CASE("isolation forest ranks the far point above the cluster") {
  const PointSet ps = testing::cluster_with_outlier();
  const IsolationForest forest(ps, 100, 256, 7);
  CHECK(forest.tree_count() == 100);
  const double far_score = forest.score(ps[testing::kOutlierIndex]);
  for (std::size_t i = 0; i < testing::kOutlierIndex; ++i) CHECK(forest.score(ps[i]) < far_score);
  CHECK(average_path_length(2) == 1.0);
  CHECK(average_path_length(1) == 0.0);
}

TEST_CASE("calibrated scores rank the outlier strictly highest") {
  const PointSet ps = testing::cluster_with_outlier();
  const OutlierModels m = fit_outlier_models(ps);
  const auto& out = m.reference[testing::kOutlierIndex];
  for (std::size_t i = 0; i < testing::kOutlierIndex; ++i) {
    CHECK(m.reference[i].lof < out.lof);
    CHECK(m.reference[i].iforest < out.iforest);
    CHECK(m.reference[i].ocsvm < out.ocsvm);
  }
}

TEST_CASE("calibrated scores are non-decreasing along the waypoint path") {
  const OutlierModels m = fit_outlier_models(testing::cluster_with_outlier());
  PlausibilityScores prev{-1.0, -1.0, -1.0};
  for (const auto& w : testing::waypoints()) {
    const auto s = plausibility_scores(std::span<const double>(w), m);
    CHECK(s.lof >= prev.lof);
    CHECK(s.iforest >= prev.iforest);
    CHECK(s.ocsvm >= prev.ocsvm);
    prev = s;
  }
}

namespace {

PointSet gaussian_reference(std::uint64_t seed, std::size_t n, std::size_t dim) {
  Rng rng(seed);
  PointSet ps(dim);
  std::vector<double> p(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : p) v = rng.normal();
    ps.add(p);
  }
  return ps;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("plausibility of reference samples and extreme points") {
  const PointSet ps = gaussian_reference(21, 60, 6);
  const OutlierModels m = fit_outlier_models(ps);
  std::vector<double> lof, iforest, ocsvm;
  for (const auto& s : m.reference) {
    lof.push_back(s.lof);
    iforest.push_back(s.iforest);
    ocsvm.push_back(s.ocsvm);
  }

  // The in-sample score of the most typical point sits at or below the median.
  const auto typical = std::min_element(iforest.begin(), iforest.end()) - iforest.begin();
  const auto s = plausibility_scores(ps[typical], m);
  CHECK(s.iforest <= median(iforest));
  CHECK(m.reference[typical].lof <= median(lof));
  CHECK(m.reference[typical].ocsvm <= median(ocsvm) + 1e-12);

  std::vector<double> mean(6, 0.0), sd(6, 0.0);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t d = 0; d < 6; ++d) mean[d] += ps[i][d] / ps.size();
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t d = 0; d < 6; ++d) sd[d] += (ps[i][d] - mean[d]) * (ps[i][d] - mean[d]) / (ps.size() - 1);
  }
  std::vector<double> far(6);
  for (std::size_t d = 0; d < 6; ++d) far[d] = mean[d] + 100.0 * std::sqrt(sd[d]);
  const auto f = plausibility_scores(far, m);
  CHECK(f.lof >= 0.99);
  CHECK(f.iforest >= 0.99);
  CHECK(f.ocsvm >= 0.99);
}

TEST_CASE("plausibility scores stay in the unit interval") {
  const OutlierModels m = fit_outlier_models(gaussian_reference(22, 40, 4));
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(4);
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (double& v : x) v = scale * rng.normal();
    const auto s = plausibility_scores(x, m);
    for (double v : {s.lof, s.iforest, s.ocsvm}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("outlier models are deterministic and reject tiny references") {
  const PointSet ps = gaussian_reference(24, 30, 3);
  const OutlierModels a = fit_outlier_models(ps), b = fit_outlier_models(ps);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CHECK(a.reference[i].lof == b.reference[i].lof);
    CHECK(a.reference[i].iforest == b.reference[i].iforest);
    CHECK(a.reference[i].ocsvm == b.reference[i].ocsvm);
  }
  CHECK_THROWS_AS(fit_outlier_models(gaussian_reference(25, 2, 3)), Error);
}

TEST_CASE("one-class SVM dual stays feasible") {
  const PointSet ps = gaussian_reference(26, 50, 3);
  const OneClassSvm svm(ps, 0.3, 0.1, 1000);
  double sum = 0.0;
  for (double a : svm.coefficients()) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0 / (0.1 * 50) + 1e-12);
    sum += a;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("calibration maps the reference range onto [0, 1]") {
  const std::vector<double> ref{2.0, 4.0, 3.0};
  const Calibration c = Calibration::fit(ref);
  CHECK(c(2.0) == 0.0);
  CHECK(c(4.0) == 1.0);
  CHECK(c(3.0) == 0.5);
  CHECK(c(-10.0) == 0.0);
  CHECK(c(10.0) == 1.0);
}

TEST_CASE("aggregate uses the sample standard deviation") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const Aggregate a = aggregate(v);
  CHECK(a.mean == 2.5);
  CHECK(a.sd == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(a.n == 4);
  CHECK(aggregate(std::vector<double>{7.0}).sd == 0.0);

  Rng rng(27);
  std::vector<double> xs(37);
  for (double& x : xs) x = rng.normal(3.0, 2.0);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const Aggregate b = aggregate(xs);
  CHECK(std::abs(b.mean - mean) < 1e-12);
  CHECK(std::abs(b.sd - std::sqrt(ss / (xs.size() - 1))) < 1e-12);
}

TEST_CASE("metric report keeps declaration order and directions") {
  MetricReport r;
  r.declare("l1", Direction::lower_better);
  r.declare("validity", Direction::higher_better);
  r.add("l1", 1.0);
  r.add("l1", 3.0);
  CHECK(r.metrics() == std::vector<std::string>{"l1", "validity"});
  CHECK(r.summary("l1").mean == 2.0);
  CHECK(r.direction("validity") == Direction::higher_better);
  CHECK(std::string(arrow(Direction::lower_better)) == "↓");
  CHECK_THROWS_AS(r.add("dtw", 1.0), Error);
}
