#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtomo/exec.hpp"
#include "rtomo/mixture.hpp"
#include "rtomo/simulator.hpp"

namespace rtomo {

/// w(kappa) for kappa = 0..kappa_max; w(-kappa) = conj(w(kappa)).
/// For a noiseless spike train sum_k a_k delta(x - mu_k) convolved with the
/// kernel, w(kappa) ~ sum_k a_k exp(-i kappa mu_k).
struct ExponentialSumCoefficients {
  std::vector<std::complex<double>> w;
  /// Kernel transform at kappa = 0..kappa_max, used as least-squares row
  /// weights (noise in w(kappa) scales with its inverse). Empty = unweighted.
  std::vector<double> transform;

  int kappa_max() const { return static_cast<int>(w.size()) - 1; }
  double weight(int kappa) const {
    return transform.empty() ? 1.0 : transform[static_cast<std::size_t>(std::abs(kappa))];
  }
  /// Conjugate-extended access for negative kappa.
  std::complex<double> operator()(int kappa) const {
    return kappa >= 0 ? w[static_cast<std::size_t>(kappa)]
                      : std::conj(w[static_cast<std::size_t>(-kappa)]);
  }
};

struct SpikeTrain {
  std::vector<double> locations;   ///< in (-pi, pi], ascending
  std::vector<double> amplitudes;  ///< matched to locations; empty until recovered
  double root_deviation = 0.0;     ///< max ||z| - 1| over the polynomial roots
};

/// Analysis transform divided by the kernel transform:
/// w(kappa) = [2*pi/T sum_t p(x_t) exp(-i kappa x_t)] / exp(-sigma^2 kappa^2 / 2).
/// Throws NumericalError when the kernel transform drops below 1e-12.
ExponentialSumCoefficients fourier_ratio(const Profile& p, const Kernel& kernel, int kappa_max);

struct PisarenkoOptions {
  /// Relative gap lambda_2 - lambda_1 <= tol * lambda_max counts as a
  /// repeated smallest eigenvalue.
  double multiplicity_tol = 1e-13;
  double unit_circle_tol = 1e-4;
};

/// Pisarenko's method: null eigenvector of the (K+1) Hermitian Toeplitz
/// matrix C_ij = c_{i-j}, c_k = conj(w(k)), then the arguments of the K roots
/// of its polynomial. Locations only, ascending.
SpikeTrain pisarenko(const ExponentialSumCoefficients& w, int components,
                     const PisarenkoOptions& options = {});

struct AmplitudeFit {
  std::vector<double> amplitudes;
  bool clipped = false;  ///< a negative least-squares amplitude was set to 0
};

/// Real least squares w(kappa) ~ sum_k a_k exp(-i kappa mu_k), rows weighted by w.weight(kappa), over
/// kappa = -kappa_fit..kappa_fit. Throws NumericalError for a rank-deficient
/// design (near-coincident locations).
AmplitudeFit recover_amplitudes(const ExponentialSumCoefficients& w,
                                const std::vector<double>& locations, int kappa_fit);

enum DeconvFlag : std::uint32_t {
  kFlagNone = 0,
  kFlagFailed = 1u << 0,             ///< no usable result; `message` says why
  kFlagMerged = 1u << 1,             ///< near-coincident spikes merged, fewer than K left
  kFlagClipped = 1u << 2,            ///< negative amplitude clipped to 0
  kFlagAmbiguousPairing = 1u << 3,   ///< 2D axis pairing hit an amplitude tie
  kFlagAmbiguousLabel = 1u << 4,     ///< labeling hit an amplitude tie
  kFlagNotConverged = 1u << 5,       ///< MLE refinement did not converge
  kFlagInconsistent = 1u << 6,       ///< the two marginals disagree on the amplitudes
};

std::string describe_flags(std::uint32_t flags);

/// Deconvolution of one profile: K image-plane locations ((d-1) x K) with
/// amplitudes. Component order is whatever the method produced; use label()
/// for a cross-profile consistent order.
struct ProfileDeconvolution {
  std::size_t index = 0;
  Eigen::MatrixXd locations;
  std::vector<double> amplitudes;
  std::uint32_t flags = kFlagNone;
  std::string message;

  bool usable() const { return (flags & (kFlagFailed | kFlagMerged | kFlagInconsistent)) == 0; }
};

struct SpectralOptions {
  PisarenkoOptions pisarenko;
  /// 0 selects min(3K, T/4, largest kappa with kernel transform >= 1e-3),
  /// never below K.
  int kappa_fit = 0;
  /// Recovered locations closer than this are merged.
  double merge_tol = 1e-4;
  /// Gauss-Newton passes refining the Pisarenko locations and amplitudes
  /// against all coefficients up to kappa_fit (0 = off).
  int polish_iterations = 20;
  /// Relative amplitude gap below which 2D pairing is ambiguous.
  double pairing_tie_tol = 1e-6;
  /// Both marginals of an image carry the same amplitudes; a rank-wise
  /// disagreement above this fraction of the largest amplitude marks the
  /// image inconsistent (its spikes are unreliable and it is not used).
  double axis_agreement_tol = 0.1;
};

int default_kappa_fit(const Kernel& kernel, int components, int resolution);

/// fourier_ratio + pisarenko + merge + recover_amplitudes (+ polish) on a 1D profile.
ProfileDeconvolution deconvolve_profile_1d(const Profile& p, const Kernel& kernel, int components,
                                           const SpectralOptions& options = {});

/// Coordinate-wise deconvolution of a 2D image: both marginals are
/// deconvolved, then x- and y-locations are paired by descending amplitude
/// rank; amplitudes are the mean of the two axes' estimates.
ProfileDeconvolution deconvolve_profile_2d(const Profile& p, const Kernel& kernel, int components,
                                           const SpectralOptions& options = {});

/// Per-profile spectral deconvolution of a whole dataset. Failures are
/// captured as flagged entries, never thrown.
std::vector<ProfileDeconvolution> deconvolve_spectral(const std::vector<Profile>& profiles, int d,
                                                      const Kernel& kernel, int components,
                                                      const SpectralOptions& options = {},
                                                      Exec exec = Exec::parallel);

}  // namespace rtomo
