#include "rtomo/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "rtomo/error.hpp"

namespace rtomo {
namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  return a <= -kPi ? a + 2.0 * kPi : a;
}

// Roots of sum_n coeffs[n] z^n via companion-matrix eigenvalues.
Eigen::VectorXcd polynomial_roots(const Eigen::VectorXcd& coeffs) {
  const Eigen::Index degree = coeffs.size() - 1;
  const std::complex<double> lead = coeffs[degree];
  if (std::abs(lead) <= 1e-14 * coeffs.norm())
    throw NumericalError("Pisarenko polynomial has a vanishing leading coefficient");
  if (degree == 1) return Eigen::VectorXcd::Constant(1, -coeffs[0] / lead);
  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(degree, degree);
  companion.diagonal(-1).setOnes();
  for (Eigen::Index n = 0; n < degree; ++n) companion(n, degree - 1) = -coeffs[n] / lead;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
  if (solver.info() != Eigen::Success) throw NumericalError("companion eigen-solve failed");
  return solver.eigenvalues();
}

double misfit(const ExponentialSumCoefficients& w, const std::vector<double>& mu, const std::vector<double>& a,
              int kappa_fit) {
  double total = 0.0;
  for (int kappa = -kappa_fit; kappa <= kappa_fit; ++kappa) {
    std::complex<double> r = w(kappa);
    for (std::size_t j = 0; j < mu.size(); ++j) r -= a[j] * std::polar(1.0, -kappa * mu[j]);
    total += std::norm(w.weight(kappa) * r);
  }
  return total;
}

// Gauss-Newton on the weighted exponential-sum misfit over kappa = -kappa_fit..kappa_fit,
// jointly in locations and amplitudes. Steps that do not lower the misfit are
// halved and finally rejected, so the result is never worse than the start.
void polish(const ExponentialSumCoefficients& w, std::vector<double>& mu, std::vector<double>& a,
            int kappa_fit, int iterations) {
  const auto k = static_cast<Eigen::Index>(mu.size());
  const Eigen::Index rows = 2 * kappa_fit + 1;
  double current = misfit(w, mu, a, kappa_fit);
  for (int it = 0; it < iterations && current > 0.0; ++it) {
    Eigen::MatrixXd jac(2 * rows, 2 * k);
    Eigen::VectorXd res(2 * rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int kappa = static_cast<int>(r) - kappa_fit;
      const double rw = w.weight(kappa);
      std::complex<double> value = w(kappa);
      for (Eigen::Index j = 0; j < k; ++j) {
        const std::complex<double> e = std::polar(1.0, -kappa * mu[static_cast<std::size_t>(j)]);
        value -= a[static_cast<std::size_t>(j)] * e;
        const std::complex<double> dmu = std::complex<double>(0.0, -kappa) * rw * a[static_cast<std::size_t>(j)] * e;
        jac(r, j) = dmu.real();
        jac(rows + r, j) = dmu.imag();
        jac(r, k + j) = rw * e.real();
        jac(rows + r, k + j) = rw * e.imag();
      }
      res[r] = rw * value.real();
      res[rows + r] = rw * value.imag();
    }
    const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(res);
    if (!step.allFinite()) return;
    bool accepted = false;
    for (double scale = 1.0; scale > 1e-3; scale *= 0.5) {
      std::vector<double> mu2 = mu, a2 = a;
      for (Eigen::Index j = 0; j < k; ++j) {
        mu2[static_cast<std::size_t>(j)] += scale * step[j];
        a2[static_cast<std::size_t>(j)] += scale * step[k + j];
      }
      const double trial = misfit(w, mu2, a2, kappa_fit);
      if (trial < current) {
        const double change = scale * step.cwiseAbs().maxCoeff();
        mu = std::move(mu2);
        a = std::move(a2);
        current = trial;
        accepted = true;
        if (change < 1e-15) return;
        break;
      }
    }
    if (!accepted) return;
  }
}

}  // namespace

ExponentialSumCoefficients fourier_ratio(const Profile& p, const Kernel& kernel, int kappa_max) {
  if (p.lattice.axes() != 1) throw InvalidArgument("fourier_ratio needs a 1D profile");
  const int t = p.lattice.points();
  if (kappa_max < 0 || kappa_max >= t / 2) throw InvalidArgument("kappa_max must be in [0, T/2)");
  ExponentialSumCoefficients out;
  out.w.resize(static_cast<std::size_t>(kappa_max) + 1);
  out.transform.resize(out.w.size());
  const double h = p.lattice.spacing();
  for (int kappa = 0; kappa <= kappa_max; ++kappa) {
    const double transform = kernel.fourier(kappa);
    if (transform < 1e-12)
      throw NumericalError("kernel transform vanishes at kappa = " + std::to_string(kappa) +
                           "; frequency too high for this sigma");
    double re = 0.0, im = 0.0;
    for (int i = 0; i < t; ++i) {
      const double phase = kappa * p.lattice.coordinate(i);
      re += p.at(i) * std::cos(phase);
      im -= p.at(i) * std::sin(phase);
    }
    out.w[static_cast<std::size_t>(kappa)] = std::complex<double>(re, im) * (h / transform);
    out.transform[static_cast<std::size_t>(kappa)] = transform;
  }
  return out;
}

SpikeTrain pisarenko(const ExponentialSumCoefficients& w, int components,
                     const PisarenkoOptions& options) {
  if (components < 1) throw InvalidArgument("need at least one component");
  if (w.kappa_max() < components) throw InvalidArgument("pisarenko needs w(0..K)");
  if (!(w(0).real() > 0.0)) throw NumericalError("w(0) must be positive");

  const int n = components + 1;
  Eigen::MatrixXcd toeplitz(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) toeplitz(i, j) = std::conj(w(i - j));  // c_{i-j} = conj(w(i-j))

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(toeplitz);
  if (eig.info() != Eigen::Success) throw NumericalError("Toeplitz eigen-solve failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(std::abs(lambda[n - 1]), std::numeric_limits<double>::min());
  if (lambda[1] - lambda[0] <= options.multiplicity_tol * scale)
    throw NumericalError("smallest Toeplitz eigenvalue is repeated: fewer than " +
                         std::to_string(components) + " resolvable spikes");

  // The null vector v satisfies sum_n v_n exp(-i n mu_k) = 0, so the
  // conjugated coefficients have their roots at exp(+i mu_k).
  const Eigen::VectorXcd coeffs = eig.eigenvectors().col(0).conjugate();
  const Eigen::VectorXcd roots = polynomial_roots(coeffs);

  SpikeTrain train;
  for (Eigen::Index r = 0; r < roots.size(); ++r) {
    const double deviation = std::abs(std::abs(roots[r]) - 1.0);
    train.root_deviation = std::max(train.root_deviation, deviation);
    if (deviation > options.unit_circle_tol)
      throw NumericalError("Pisarenko root off the unit circle by " + std::to_string(deviation));
    train.locations.push_back(wrap_angle(std::arg(roots[r])));
  }
  std::sort(train.locations.begin(), train.locations.end());
  return train;
}

AmplitudeFit recover_amplitudes(const ExponentialSumCoefficients& w,
                                const std::vector<double>& locations, int kappa_fit) {
  const auto k = static_cast<Eigen::Index>(locations.size());
  if (k < 1) throw InvalidArgument("no locations");
  if (kappa_fit < k) throw InvalidArgument("kappa_fit must be at least K");
  if (kappa_fit > w.kappa_max()) throw InvalidArgument("kappa_fit exceeds available coefficients");

  const Eigen::Index rows = 2 * kappa_fit + 1;
  Eigen::MatrixXd design(2 * rows, k);
  Eigen::VectorXd rhs(2 * rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int kappa = static_cast<int>(r) - kappa_fit;
    const double rw = w.weight(kappa);
    const std::complex<double> value = w(kappa);
    rhs[r] = rw * value.real();
    rhs[rows + r] = rw * value.imag();
    for (Eigen::Index c = 0; c < k; ++c) {
      const double phase = -kappa * locations[static_cast<std::size_t>(c)];
      design(r, c) = rw * std::cos(phase);
      design(rows + r, c) = rw * std::sin(phase);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[k - 1] <= 1e-10 * sv[0]) throw NumericalError("amplitude design is rank deficient");
  const Eigen::VectorXd solution = svd.solve(rhs);

  AmplitudeFit fit;
  fit.amplitudes.resize(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    double a = solution[c];
    if (a < 0.0) {
      a = 0.0;
      fit.clipped = true;
    }
    fit.amplitudes[static_cast<std::size_t>(c)] = a;
  }
  return fit;
}

std::string describe_flags(std::uint32_t flags) {
  static constexpr std::pair<std::uint32_t, const char*> names[] = {
      {kFlagFailed, "failed"},
      {kFlagMerged, "merged"},
      {kFlagClipped, "clipped"},
      {kFlagAmbiguousPairing, "ambiguous-pairing"},
      {kFlagAmbiguousLabel, "ambiguous-label"},
      {kFlagNotConverged, "not-converged"},
      {kFlagInconsistent, "inconsistent-marginals"},
  };
  std::string out;
  for (const auto& [bit, name] : names) {
    if ((flags & bit) == 0) continue;
    if (!out.empty()) out += ',';
    out += name;
  }
  return out.empty() ? "ok" : out;
}

int default_kappa_fit(const Kernel& kernel, int components, int resolution) {
  const int by_kernel = static_cast<int>(std::floor(std::sqrt(2.0 * std::log(1e3)) / kernel.sigma));
  const int kappa = std::min({3 * components, resolution / 4, by_kernel});
  return std::max(kappa, components);
}

ProfileDeconvolution deconvolve_profile_1d(const Profile& p, const Kernel& kernel, int components,
                                           const SpectralOptions& options) {
  const int kappa_fit = options.kappa_fit > 0
                            ? options.kappa_fit
                            : default_kappa_fit(kernel, components, p.lattice.points());
  const ExponentialSumCoefficients w = fourier_ratio(p, kernel, std::max(components, kappa_fit));
  SpikeTrain train = pisarenko(w, components, options.pisarenko);

  ProfileDeconvolution out;
  out.index = p.index;

  // Merge circularly adjacent locations closer than merge_tol.
  std::vector<double> merged;
  for (double loc : train.locations) {
    if (!merged.empty() && loc - merged.back() < options.merge_tol) {
      merged.back() = 0.5 * (merged.back() + loc);
      out.flags |= kFlagMerged;
    } else {
      merged.push_back(loc);
    }
  }
  if (merged.size() > 1 && merged.front() + 2.0 * kPi - merged.back() < options.merge_tol) {
    merged.front() = wrap_angle(0.5 * (merged.front() + merged.back() + 2.0 * kPi));
    merged.pop_back();
    std::sort(merged.begin(), merged.end());
    out.flags |= kFlagMerged;
  }
  if (out.flags & kFlagMerged)
    out.message = "merged to " + std::to_string(merged.size()) + " of " +
                  std::to_string(components) + " spikes";

  AmplitudeFit amps = recover_amplitudes(w, merged, kappa_fit);
  if (amps.clipped) {
    out.flags |= kFlagClipped;
  } else if (!(out.flags & kFlagMerged) && options.polish_iterations > 0) {
    std::vector<double> mu = merged, a = amps.amplitudes;
    polish(w, mu, a, kappa_fit, options.polish_iterations);
    for (double& m : mu) m = wrap_angle(m);
    std::vector<std::size_t> order(mu.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return mu[i] < mu[j]; });
    bool ok = std::all_of(a.begin(), a.end(), [](double x) { return x > 0.0; });
    for (std::size_t j = 1; j < order.size(); ++j) ok = ok && mu[order[j]] - mu[order[j - 1]] >= options.merge_tol;
    if (ok) {
      for (std::size_t j = 0; j < order.size(); ++j) {
        merged[j] = mu[order[j]];
        amps.amplitudes[j] = a[order[j]];
      }
    }
  }
  out.locations = Eigen::Map<const Eigen::RowVectorXd>(merged.data(),
                                                       static_cast<Eigen::Index>(merged.size()));
  out.amplitudes = amps.amplitudes;
  return out;
}

ProfileDeconvolution deconvolve_profile_2d(const Profile& p, const Kernel& kernel, int components,
                                           const SpectralOptions& options) {
  if (p.lattice.axes() != 2) throw InvalidArgument("deconvolve_profile_2d needs an image profile");
  ProfileDeconvolution axis[2];
  for (int a = 0; a < 2; ++a) axis[a] = deconvolve_profile_1d(marginalize(p, a), kernel, components, options);

  ProfileDeconvolution out;
  out.index = p.index;
  out.flags = axis[0].flags | axis[1].flags;
  if (out.flags & kFlagMerged) {
    out.message = "marginal spikes merged; planar pairing impossible";
    return out;
  }

  std::vector<int> rank[2];
  for (int a = 0; a < 2; ++a) {
    const auto& amp = axis[a].amplitudes;
    rank[a].resize(amp.size());
    std::iota(rank[a].begin(), rank[a].end(), 0);
    std::stable_sort(rank[a].begin(), rank[a].end(), [&](int i, int j) { return amp[i] > amp[j]; });
    for (std::size_t r = 1; r < rank[a].size(); ++r) {
      const double hi = amp[rank[a][r - 1]], lo = amp[rank[a][r]];
      if (hi - lo <= options.pairing_tie_tol * std::max(hi, 1e-300)) {
        out.flags |= kFlagAmbiguousPairing;
        out.message = "amplitude tie while pairing axes";
      }
    }
  }

  out.locations.resize(2, components);
  out.amplitudes.resize(static_cast<std::size_t>(components));
  double top = 0.0, gap = 0.0;
  for (int r = 0; r < components; ++r) {
    const int ix = rank[0][r], iy = rank[1][r];
    out.locations(0, r) = axis[0].locations(0, ix);
    out.locations(1, r) = axis[1].locations(0, iy);
    out.amplitudes[r] = 0.5 * (axis[0].amplitudes[ix] + axis[1].amplitudes[iy]);
    top = std::max({top, axis[0].amplitudes[ix], axis[1].amplitudes[iy]});
    gap = std::max(gap, std::abs(axis[0].amplitudes[ix] - axis[1].amplitudes[iy]));
  }
  if (gap > options.axis_agreement_tol * top) {
    out.flags |= kFlagInconsistent;
    out.message = "marginal amplitudes disagree by " + std::to_string(gap / top) + " of the largest";
  }
  return out;
}

std::vector<ProfileDeconvolution> deconvolve_spectral(const std::vector<Profile>& profiles, int d,
                                                      const Kernel& kernel, int components,
                                                      const SpectralOptions& options, Exec exec) {
  if (d != 2 && d != 3) throw InvalidArgument("dimension must be 2 or 3");
  std::vector<ProfileDeconvolution> out(profiles.size());
  for_each_index(exec, profiles.size(), [&](std::size_t n) {
    try {
      out[n] = d == 2 ? deconvolve_profile_1d(profiles[n], kernel, components, options)
                      : deconvolve_profile_2d(profiles[n], kernel, components, options);
    } catch (const std::exception& e) {
      out[n] = ProfileDeconvolution{};
      out[n].index = profiles[n].index;
      out[n].flags = kFlagFailed;
      out[n].message = e.what();
    }
  });
  return out;
}

}  // namespace rtomo
