#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rtomo/exec.hpp"
#include "rtomo/geometry.hpp"
#include "rtomo/mixture.hpp"

namespace rtomo {

/// Regular lattice on [-pi, pi): x_t = -pi + 2*pi*t/T, t = 0..T-1, on each
/// of `axes` image axes.
class Lattice {
 public:
  Lattice(int points, int axes);

  int points() const { return t_; }
  int axes() const { return axes_; }
  double spacing() const;
  double coordinate(int t) const;
  std::size_t size() const;  ///< T or T*T

 private:
  int t_;
  int axes_;
};

/// One sampled projection. 1D profiles hold T values; 2D images hold T*T
/// values row-major with the first image coordinate as the slow index:
/// value(i, j) = values[i*T + j] at (x_i, x_j).
struct Profile {
  std::size_t index = 0;
  Lattice lattice{4, 1};
  std::vector<double> values;

  double at(int i) const { return values[static_cast<std::size_t>(i)]; }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(lattice.points()) +
                  static_cast<std::size_t>(j)];
  }
};

/// Hidden parameters of a simulated dataset. Estimator entry points never
/// take this block; it exists for verification only.
struct HiddenTruth {
  std::vector<double> weights;
  Eigen::MatrixXd locations;               ///< centred, d x K
  std::vector<Rotation> rotations;         ///< one per profile
  std::vector<Eigen::MatrixXd> projected;  ///< H R_n mu_k, (d-1) x K per profile
};

struct Dataset {
  int d = 2;
  int components = 0;
  double sigma = 1.0;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  Lattice lattice{4, 1};
  std::vector<Profile> profiles;
  std::optional<HiddenTruth> truth;

  std::size_t size() const { return profiles.size(); }
};

struct SimulationOptions {
  std::size_t count = 1;   ///< N
  int resolution = 256;    ///< T, even, >= 4
  double noise_sd = 0.0;   ///< sigma_eps
  std::uint64_t seed = 0;
  bool keep_truth = false;
};

/// Stochastic Radon transform of length N. Profile n draws its rotation and
/// then its noise from make_rng(seed, n).
Dataset simulate(const RadialMixture& m, const SimulationOptions& options,
                 Exec exec = Exec::parallel);

/// Noiseless profile of `m` at `rotation` sampled on `lattice`.
std::vector<double> sample_profile(const RadialMixture& m, const Rotation& rotation,
                                   const Lattice& lattice);

/// Marginal of a 2D image along the other axis, kept coordinate = `axis`
/// (0: first image coordinate, 1: second). Sum times lattice spacing.
Profile marginalize(const Profile& image, int axis);

}  // namespace rtomo
