#include "rtomo/simulator.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rtomo/error.hpp"
#include "rtomo/random.hpp"

namespace rtomo {

Lattice::Lattice(int points, int axes) : t_(points), axes_(axes) {
  if (points < 4 || points % 2 != 0) throw InvalidArgument("lattice size T must be even and >= 4");
  if (axes != 1 && axes != 2) throw InvalidArgument("lattice must have 1 or 2 axes");
}

double Lattice::spacing() const { return 2.0 * std::numbers::pi / t_; }

double Lattice::coordinate(int t) const { return -std::numbers::pi + spacing() * t; }

std::size_t Lattice::size() const {
  const auto t = static_cast<std::size_t>(t_);
  return axes_ == 1 ? t : t * t;
}

std::vector<double> sample_profile(const RadialMixture& m, const Rotation& rotation,
                                   const Lattice& lattice) {
  if (lattice.axes() != m.dim() - 1) throw InvalidArgument("lattice axes must equal d - 1");
  const Eigen::MatrixXd projected = project_points(m.locations(), rotation);
  const int t = lattice.points();
  const int k = m.size();
  const double sigma = m.sigma();
  const double inv2var = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> values(lattice.size(), 0.0);
  if (lattice.axes() == 1) {
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
    for (int i = 0; i < t; ++i) {
      const double x = lattice.coordinate(i);
      double v = 0.0;
      for (int c = 0; c < k; ++c) {
        const double dx = x - projected(0, c);
        v += m.weights()[c] * std::exp(-dx * dx * inv2var);
      }
      values[static_cast<std::size_t>(i)] = norm * v;
    }
    return values;
  }
  // Separable: N(x; a, s) N(y; b, s) tabulated per component and axis.
  const double norm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
  Eigen::MatrixXd gx(t, k), gy(t, k);
  for (int i = 0; i < t; ++i) {
    const double x = lattice.coordinate(i);
    for (int c = 0; c < k; ++c) {
      const double dx = x - projected(0, c), dy = x - projected(1, c);
      gx(i, c) = std::exp(-dx * dx * inv2var);
      gy(i, c) = std::exp(-dy * dy * inv2var);
    }
  }
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j) {
      double v = 0.0;
      for (int c = 0; c < k; ++c) v += m.weights()[c] * gx(i, c) * gy(j, c);
      values[static_cast<std::size_t>(i) * t + j] = norm * v;
    }
  return values;
}

Dataset simulate(const RadialMixture& m, const SimulationOptions& options, Exec exec) {
  if (options.count < 1) throw InvalidArgument("N must be at least 1");
  if (!(options.noise_sd >= 0.0) || !std::isfinite(options.noise_sd))
    throw InvalidArgument("noise standard deviation must be non-negative");
  const Lattice lattice(options.resolution, m.dim() - 1);

  Dataset data;
  data.d = m.dim();
  data.components = m.size();
  data.sigma = m.sigma();
  data.noise_sd = options.noise_sd;
  data.seed = options.seed;
  data.lattice = lattice;
  data.profiles.resize(options.count);

  std::vector<std::optional<Rotation>> rotations(options.count);
  for_each_index(exec, options.count, [&](std::size_t n) {
    Rng rng = make_rng(options.seed, n);
    Rotation rotation = sample_rotation(m.dim(), rng);
    Profile& p = data.profiles[n];
    p.index = n;
    p.lattice = lattice;
    p.values = sample_profile(m, rotation, lattice);
    if (options.noise_sd > 0.0) {
      std::normal_distribution<double> noise(0.0, options.noise_sd);
      for (double& v : p.values) v += noise(rng);
    }
    rotations[n] = std::move(rotation);
  });

  if (options.keep_truth) {
    HiddenTruth truth;
    truth.weights = m.weights();
    truth.locations = m.locations();
    truth.rotations.reserve(options.count);
    truth.projected.reserve(options.count);
    for (auto& r : rotations) {
      truth.projected.push_back(project_points(m.locations(), *r));
      truth.rotations.push_back(std::move(*r));
    }
    data.truth = std::move(truth);
  }
  return data;
}

Profile marginalize(const Profile& image, int axis) {
  if (image.lattice.axes() != 2) throw InvalidArgument("marginalize needs a 2D image profile");
  if (axis != 0 && axis != 1) throw InvalidArgument("axis must be 0 or 1");
  const int t = image.lattice.points();
  Profile out;
  out.index = image.index;
  out.lattice = Lattice(t, 1);
  out.values.assign(static_cast<std::size_t>(t), 0.0);
  const double h = image.lattice.spacing();
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j) out.values[static_cast<std::size_t>(axis == 0 ? i : j)] += image.at(i, j);
  for (double& v : out.values) v *= h;
  return out;
}

}  // namespace rtomo
