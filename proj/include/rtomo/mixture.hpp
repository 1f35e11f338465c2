#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rtomo/geometry.hpp"

namespace rtomo {

/// Isotropic Gaussian kernel with known standard deviation. Its marginals
/// are Gaussians with the same sigma and its Fourier transform
/// exp(-sigma^2 k^2 / 2) never vanishes.
struct Kernel {
  double sigma = 1.0;

  /// Density of N(center, sigma^2 I) in x.size() dimensions.
  double density(const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& center) const;
  double density_1d(double x, double center) const;
  /// Fourier transform of the 1D marginal, exp(-sigma^2 k^2 / 2).
  double fourier(double kappa) const;
};

/// Finite mixture of radial Gaussians in d = 2 or 3 dimensions.
///
/// Weights are stored as given (normalization is optional and recorded), must
/// be positive and pairwise distinct. Locations are re-centred to zero
/// unweighted centroid on construction and must lie in the ball of radius pi.
/// A mixture with K = 0 components is allowed and is the zero density.
class RadialMixture {
 public:
  /// `locations` is d x K.
  RadialMixture(int d, double sigma, std::vector<double> weights, Eigen::MatrixXd locations,
                bool normalize_weights = false);

  int dim() const { return d_; }
  int size() const { return static_cast<int>(weights_.size()); }
  double sigma() const { return kernel_.sigma; }
  const Kernel& kernel() const { return kernel_; }
  const std::vector<double>& weights() const { return weights_; }
  /// Centred locations, d x K.
  const Eigen::MatrixXd& locations() const { return locations_; }
  /// Centroid subtracted on construction.
  const Eigen::VectorXd& removed_centroid() const { return removed_centroid_; }
  bool weights_normalized() const { return normalized_; }

  /// Same mixture with every location replaced by R * mu.
  RadialMixture rotated(const Rotation& rotation) const;

  /// Components reordered by descending weight; this is the label order used
  /// by every estimator output.
  RadialMixture canonical() const;

 private:
  int d_;
  Kernel kernel_;
  std::vector<double> weights_;
  Eigen::MatrixXd locations_;
  Eigen::VectorXd removed_centroid_;
  bool normalized_ = false;
};

double eval_density(const RadialMixture& m, const Eigen::VectorXd& x);

/// Line integral of the rotated mixture along the last axis, evaluated at the
/// (d-1)-dimensional image point p: sum_k q_k N(p; H R mu_k, sigma^2 I).
double profile_function(const RadialMixture& m, const Rotation& rotation,
                        const Eigen::VectorXd& p);

/// Same, given projected locations ((d-1) x K) directly.
double profile_from_projected(const Kernel& kernel, const std::vector<double>& weights,
                              const Eigen::MatrixXd& projected, const Eigen::VectorXd& p);

}  // namespace rtomo
