#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtomo/exec.hpp"
#include "rtomo/mixture.hpp"
#include "rtomo/shape.hpp"

namespace rtomo {

/// One compared quantity of a Monte Carlo check.
struct MonteCarloEntry {
  std::string name;
  double empirical = 0.0;
  double reference = 0.0;
  double standard_error = 0.0;
  /// Side-by-side values that are reported but not asserted
  /// (e.g. constants under a different normalization).
  std::vector<std::pair<std::string, double>> extra;
  bool pass = true;  ///< |empirical - reference| <= 3 * standard_error
};

struct MonteCarloReport {
  std::string quantity;
  std::string reference_source;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::vector<MonteCarloEntry> entries;
  std::vector<std::pair<std::string, double>> diagnostics;
  bool pass = true;

  /// Appends an entry and folds its verdict into `pass`.
  void add(MonteCarloEntry entry, double sigmas = 3.0);
};

/// Draws per Monte Carlo chunk; chunk c uses make_rng(seed, c).
inline constexpr std::size_t kMonteCarloChunk = 4096;

/// Sample mean, covariance and their standard errors of a vector-valued
/// draw, computed in fixed-size chunks (two passes, the second regenerating
/// the draws from the chunk seeds). Reduction order is by chunk index.
struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_se;
  Eigen::VectorXd skewness;
  Eigen::VectorXd excess_kurtosis;
  std::size_t samples = 0;
};

/// `draw(rng, out)` fills `out` (an Eigen::VectorXd of size dim) with one
/// sample.
template <class Draw>
MomentSummary monte_carlo_moments(std::size_t samples, std::uint64_t seed, Eigen::Index dim,
                                  std::size_t chunk, Draw&& draw, Exec exec);

/// Empirical mean of Gram(H A V) over Haar rotations vs ((d-1)/d) Gram(V).
MonteCarloReport check_projection_identity(const Eigen::MatrixXd& v, std::size_t samples,
                                           std::uint64_t seed, Exec exec = Exec::parallel);

/// Sphere-moment oracle for Gamma = c (I - u u^T), u uniform on S^{d-1}:
/// Cov[vec Gamma] (column-stacking vec, d^2 x d^2).
Eigen::MatrixXd gamma_covariance_oracle(int d, double c);

/// Cov[vec Gamma] for Gamma = 2 A^T H^T H A, A Haar on SO(3), against the
/// sphere-moment oracle; the alternative constants are attached as extras.
MonteCarloReport estimate_gamma_covariance(std::size_t samples, std::uint64_t seed,
                                           Exec exec = Exec::parallel);

struct GramCltOptions {
  std::size_t profiles = 500;          ///< N per replication
  std::size_t replications = 2000;     ///< R
  std::size_t gamma_samples = 1000000; ///< draws for Cov[vec Gamma']
  std::uint64_t seed = 0;
};

/// Covariance of sqrt(N) vech(Ghat - G) over R replications (hidden-truth
/// locations) against (V^T (x) V^T) Cov[vec Gamma'] (V (x) V) with
/// Gamma' = d/(d-1) A^T H^T H A. Marginal skewness / excess kurtosis of the
/// replicates are screened against |skew| < 0.25, |kurt| < 0.5.
MonteCarloReport gram_clt_check(const RadialMixture& m, const GramCltOptions& options,
                                Exec exec = Exec::parallel);

/// F_ij = 1/(2 pi sigma_eps^2) E[ integral phi(x|mu_i) phi(x|mu_j) dx ] with the
/// Gaussian overlap in closed form and the expectation over Haar rotations
/// by Monte Carlo.
Eigen::MatrixXd fisher_matrix(const RadialMixture& m, double noise_sd, std::size_t samples,
                              std::uint64_t seed, Exec exec = Exec::parallel);

struct BootstrapResult {
  std::vector<Configuration> replicates;   ///< aligned to the point estimate
  std::vector<double> residuals;           ///< Procrustes residual per replicate
  std::vector<std::vector<std::size_t>> resamples;
  Eigen::VectorXd spread;                  ///< per-point RMS distance to the point estimate
};

/// Resamples profiles (with replacement) from cached, labeled deconvolution
/// results, re-runs hybrid_estimate + factor, and aligns each replicate to
/// `point`. Never touches profile data.
BootstrapResult bootstrap(std::span<const ProfileDeconvolution> labeled, int d,
                          const Configuration& point, std::size_t replicates, std::uint64_t seed,
                          const std::optional<std::vector<double>>& shared_weights = std::nullopt,
                          Exec exec = Exec::parallel);

/// Same, with explicit resamples.
BootstrapResult bootstrap(std::span<const ProfileDeconvolution> labeled, int d,
                          const Configuration& point,
                          const std::vector<std::vector<std::size_t>>& resamples,
                          const std::optional<std::vector<double>>& shared_weights = std::nullopt,
                          Exec exec = Exec::parallel);

/// Mean of (d/(d-1)) Gram(H A_n V) over N Haar rotations: the hybrid
/// estimator applied to exact projected locations.
Eigen::MatrixXd projected_gram_estimate(const Eigen::MatrixXd& v, std::size_t profiles,
                                        std::uint64_t seed, Exec exec = Exec::parallel);

}  // namespace rtomo

#include "rtomo/verify_impl.hpp"
