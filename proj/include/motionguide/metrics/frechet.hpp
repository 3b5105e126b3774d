#pragma once

#include <Eigen/Dense>

#include "motionguide/ndiff/tensor.hpp"

namespace mg::metrics {

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Mean and unbiased (n - 1) covariance of the rows of `features`, plus
/// `shrinkage` on the diagonal.
Gaussian fit_gaussian(const Eigen::MatrixXd& features, double shrinkage);

/// Square root of a symmetric PSD matrix by eigendecomposition; negative
/// eigenvalues from round-off are clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), clamped at zero.
double frechet_gaussian(const Gaussian& a, const Gaussian& b);

enum class FrechetMode {
  pose,   // features are the T per-frame pose vectors
  motion  // features are the T - 1 per-frame velocity vectors
};

inline constexpr double kCovarianceShrinkage = 1e-6;

/// Fréchet distance between Gaussians fitted to the features of each motion.
double frechet_distance(const nd::Tensor& x, const nd::Tensor& x_prime, FrechetMode mode,
                        double shrinkage = kCovarianceShrinkage);

}  // namespace mg::metrics
