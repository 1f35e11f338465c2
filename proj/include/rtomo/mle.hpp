#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rtomo/exec.hpp"
#include "rtomo/mixture.hpp"
#include "rtomo/simulator.hpp"
#include "rtomo/spectral.hpp"

namespace rtomo {

enum class FitMode { shared, separate };

/// Parameters of the least-squares deconvolution. Profiles are partitioned
/// into groups; every group shares one weight vector. Shared mode is a single
/// group (or groups of a fixed size), separate mode is one group per profile.
struct DeconvParams {
  FitMode mode = FitMode::shared;
  std::vector<Eigen::MatrixXd> locations;     ///< per profile, (d-1) x K
  std::vector<std::vector<double>> weights;   ///< per group, K values
  std::vector<std::size_t> group;             ///< profile -> group index

  std::size_t profiles() const { return locations.size(); }
  int components() const;
  const std::vector<double>& weights_of(std::size_t profile) const { return weights[group[profile]]; }
};

/// Builds the group map: separate -> one group per profile; shared -> groups
/// of `group_size` consecutive profiles (0 = all in one group).
std::vector<std::size_t> make_groups(FitMode mode, std::size_t profiles, std::size_t group_size);

struct ObjectiveValue {
  double value = 0.0;
  std::vector<Eigen::MatrixXd> grad_locations;
  std::vector<std::vector<double>> grad_weights;
};

/// c * sum_n sum_t (I_n(x_t) - sum_k q_k phi(x_t | mu_k^(n)))^2 with
/// c = (2*pi/T)^(d-1) / N, and its exact gradient.
ObjectiveValue objective(const DeconvParams& params, const std::vector<Profile>& profiles,
                         const Kernel& kernel, Exec exec = Exec::parallel);

struct FitOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-8;        ///< sup-norm of the gradient
  double relative_decrease_tol = 1e-10;
  double condition_limit = 1e12;     ///< beyond this, take a gradient step
  std::size_t group_size = 0;        ///< shared mode only; 0 = all profiles
  SpectralOptions spectral;          ///< used when no init is supplied
};

struct GroupReport {
  int iterations = 0;
  double objective = 0.0;       ///< group contribution, same normalization
  double gradient_norm = 0.0;   ///< sup-norm, group-normalized objective
  int gradient_steps = 0;       ///< ill-conditioned fallbacks taken
  bool converged = false;
};

struct FitReport {
  std::vector<GroupReport> groups;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;  ///< max over groups
  bool converged = false;
};

struct FitResult {
  DeconvParams params;
  FitReport report;
};

/// Spectral starting point: labeled per-profile spectral estimates; in
/// shared groups the weights are the per-component median of the profile
/// amplitudes. Throws NumericalError when a profile yields fewer than K
/// usable spikes.
DeconvParams spectral_init(const std::vector<Profile>& profiles, int d, const Kernel& kernel,
                           int components, FitMode mode, const FitOptions& options = {},
                           Exec exec = Exec::parallel);

/// Local minimizer of objective() by damped Gauss-Newton (Armijo
/// backtracking; gradient step when the normal equations have condition
/// number above the limit).
FitResult fit(const std::vector<Profile>& profiles, int d, const Kernel& kernel, int components,
              FitMode mode, const std::optional<DeconvParams>& init = std::nullopt,
              const FitOptions& options = {}, Exec exec = Exec::parallel);

/// Residual standard deviation after a fit: sqrt(SSE / (points - parameters)).
double estimate_noise_sd(const DeconvParams& params, const std::vector<Profile>& profiles,
                         const Kernel& kernel);

/// Per-profile results in the form consumed by label()/hybrid_estimate():
/// amplitudes are the profile's group weights.
std::vector<ProfileDeconvolution> to_deconvolutions(const DeconvParams& params,
                                                    const FitReport& report,
                                                    const std::vector<Profile>& profiles);

}  // namespace rtomo
