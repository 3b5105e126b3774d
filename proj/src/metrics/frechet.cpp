#include "motionguide/metrics/frechet.hpp"

#include <algorithm>

#include "motionguide/errors.hpp"

namespace mg::metrics {

Gaussian fit_gaussian(const Eigen::MatrixXd& features, double shrinkage) {
  if (features.rows() < 2) throw structural_error("fit_gaussian needs at least 2 feature rows");
  Gaussian g;
  g.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - g.mean.transpose();
  g.covariance = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  g.covariance.diagonal().array() += shrinkage;
  return g;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw numerical_error("eigendecomposition failed");
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

double frechet_gaussian(const Gaussian& a, const Gaussian& b) {
  if (a.mean.size() != b.mean.size()) throw structural_error("frechet: Gaussians of different dimension");
  // Tr((S1 S2)^(1/2)) = Tr((S1^(1/2) S2 S1^(1/2))^(1/2)), and the latter is symmetric PSD.
  const Eigen::MatrixXd root_a = psd_sqrt(a.covariance);
  const Eigen::MatrixXd inner = root_a * b.covariance * root_a;
  const Eigen::MatrixXd sym = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw numerical_error("eigendecomposition failed");
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value =
      (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
  return std::max(value, 0.0);
}

namespace {

Eigen::MatrixXd features_of(const nd::Tensor& x, FrechetMode mode) {
  const auto rows = static_cast<Eigen::Index>(x.dim(0));
  const auto cols = static_cast<Eigen::Index>(x.dim(1));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> frames(x.data().data(),
                                                                                                 rows, cols);
  if (mode == FrechetMode::pose) return frames;
  return frames.bottomRows(rows - 1) - frames.topRows(rows - 1);
}

}  // namespace

double frechet_distance(const nd::Tensor& x, const nd::Tensor& x_prime, FrechetMode mode, double shrinkage) {
  if (x.rank() != 2 || x_prime.rank() != 2 || x.dim(1) != x_prime.dim(1)) {
    throw structural_error("frechet: expected [T, D] frames of equal width, got " + nd::shape_string(x.shape()) +
                           " and " + nd::shape_string(x_prime.shape()));
  }
  if (x.dim(0) < 2 || x_prime.dim(0) < 2) throw structural_error("frechet: motions need at least 2 frames");
  if (mode == FrechetMode::motion && (x.dim(0) < 3 || x_prime.dim(0) < 3)) {
    throw structural_error("frechet: motion mode needs at least 3 frames for a velocity covariance");
  }
  return frechet_gaussian(fit_gaussian(features_of(x, mode), shrinkage),
                          fit_gaussian(features_of(x_prime, mode), shrinkage));
}

}  // namespace mg::metrics
