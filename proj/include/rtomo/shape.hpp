#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rtomo/exec.hpp"
#include "rtomo/spectral.hpp"

namespace rtomo {

/// Gram(V) = V^T V of the columns of a dim x K matrix.
Eigen::MatrixXd gram(const Eigen::MatrixXd& locations);

/// Shape estimate: Gram component plus mixing weights, in canonical label
/// order (weights descending).
struct ShapeEstimate {
  Eigen::MatrixXd gram;
  std::vector<double> weights;
  std::size_t profiles_used = 0;
};

/// A d x K point set with zero centroid representing a shape (defined up to
/// O(d)).
struct Configuration {
  Eigen::MatrixXd points;
  int effective_rank = 0;  ///< eigenvalues above 1e-6 * trace
};

/// Sorts each profile's components by amplitude, descending. Ties within
/// 1e-9 (relative) are broken by lexicographic location order and flagged.
/// Unusable profiles (failed/merged) pass through untouched.
ProfileDeconvolution label(const ProfileDeconvolution& result);
std::vector<ProfileDeconvolution> label(const std::vector<ProfileDeconvolution>& results);

enum class WeightSource {
  mean_amplitude,  ///< mean of per-profile amplitudes after labeling
  shared,          ///< the supplied shared weights
};

/// Hybrid estimator: Ghat = d/(d-1) * mean_n Gram(centred labeled locations),
/// symmetrized. Unusable profiles are skipped. `shared_weights` (label order)
/// replaces the amplitude mean when given. The result is permuted to
/// descending weight order. Throws InvalidArgument when nothing is usable.
ShapeEstimate hybrid_estimate(std::span<const ProfileDeconvolution> labeled, int d,
                              const std::optional<std::vector<double>>& shared_weights = std::nullopt);

/// Same estimator on an explicit index resample (bootstrap).
ShapeEstimate hybrid_estimate(std::span<const ProfileDeconvolution> labeled, int d,
                              std::span<const std::size_t> indices,
                              const std::optional<std::vector<double>>& shared_weights = std::nullopt);

/// Rank-d PSD factor of the Gram component: clamp negative eigenvalues, keep
/// the top d, points = diag(sqrt(lambda)) U^T, largest-magnitude entry of each
/// kept eigenvector made positive, columns re-centred.
Configuration factor(const ShapeEstimate& estimate, int d);
Configuration factor(const Eigen::MatrixXd& gram, int d);

struct ProcrustesResult {
  Eigen::MatrixXd rotation;  ///< Q in O(d)
  double residual = 0.0;     ///< ||Q A - B||_F
};

/// Orthogonal Procrustes: Q = argmin over O(d) of ||Q A - B||_F (reflections
/// allowed), from the SVD of B A^T.
ProcrustesResult procrustes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Largest per-point distance ||(Q A - B)_k|| after alignment.
double max_point_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace rtomo
