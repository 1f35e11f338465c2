#include "rtomo/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rtomo/error.hpp"

namespace rtomo {

double Kernel::density(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& center) const {
  const double var = sigma * sigma;
  const double norm = std::pow(2.0 * std::numbers::pi * var, -0.5 * static_cast<double>(x.size()));
  return norm * std::exp(-(x - center).squaredNorm() / (2.0 * var));
}

double Kernel::density_1d(double x, double center) const {
  const double z = (x - center) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double Kernel::fourier(double kappa) const { return std::exp(-0.5 * sigma * sigma * kappa * kappa); }

RadialMixture::RadialMixture(int d, double sigma, std::vector<double> weights,
                             Eigen::MatrixXd locations, bool normalize_weights)
    : d_(d), kernel_{sigma}, weights_(std::move(weights)), locations_(std::move(locations)) {
  if (d != 2 && d != 3) throw InvalidArgument("mixture dimension must be 2 or 3");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
  const auto k = static_cast<Eigen::Index>(weights_.size());
  if (locations_.cols() != k || (k > 0 && locations_.rows() != d))
    throw InvalidArgument("locations must be d x K");
  if (k == 0) locations_.resize(d, 0);
  for (double q : weights_)
    if (!(q > 0.0) || !std::isfinite(q)) throw InvalidArgument("weights must be positive");
  const double qmax = k ? *std::max_element(weights_.begin(), weights_.end()) : 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i)
    for (std::size_t j = i + 1; j < weights_.size(); ++j)
      if (std::abs(weights_[i] - weights_[j]) <= 1e-12 * qmax)
        throw InvalidArgument("weights must be pairwise distinct");
  if (normalize_weights && k > 0) {
    const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    for (double& q : weights_) q /= total;
    normalized_ = true;
  }
  removed_centroid_ = Eigen::VectorXd::Zero(d);
  if (k > 0) {
    removed_centroid_ = locations_.rowwise().mean();
    locations_.colwise() -= removed_centroid_;
  }
  for (Eigen::Index j = 0; j < k; ++j)
    if (locations_.col(j).norm() > std::numbers::pi)
      throw InvalidArgument("locations must lie in the ball of radius pi");
}

RadialMixture RadialMixture::rotated(const Rotation& rotation) const {
  if (rotation.dim() != d_) throw InvalidArgument("rotation dimension mismatch");
  RadialMixture out = *this;
  out.locations_ = rotation.matrix() * locations_;
  return out;
}

RadialMixture RadialMixture::canonical() const {
  std::vector<int> order(weights_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return weights_[a] > weights_[b]; });
  RadialMixture out = *this;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.weights_[i] = weights_[order[i]];
    out.locations_.col(static_cast<Eigen::Index>(i)) = locations_.col(order[i]);
  }
  return out;
}

double eval_density(const RadialMixture& m, const Eigen::VectorXd& x) {
  if (x.size() != m.dim()) throw InvalidArgument("dimension mismatch in eval_density");
  double total = 0.0;
  for (int k = 0; k < m.size(); ++k) total += m.weights()[k] * m.kernel().density(x, m.locations().col(k));
  return total;
}

double profile_from_projected(const Kernel& kernel, const std::vector<double>& weights,
                              const Eigen::MatrixXd& projected, const Eigen::VectorXd& p) {
  if (projected.rows() != p.size() || projected.cols() != static_cast<Eigen::Index>(weights.size()))
    throw InvalidArgument("dimension mismatch in profile evaluation");
  double total = 0.0;
  for (Eigen::Index k = 0; k < projected.cols(); ++k)
    total += weights[static_cast<std::size_t>(k)] * kernel.density(p, projected.col(k));
  return total;
}

double profile_function(const RadialMixture& m, const Rotation& rotation, const Eigen::VectorXd& p) {
  if (rotation.dim() != m.dim() || p.size() != m.dim() - 1)
    throw InvalidArgument("dimension mismatch in profile_function");
  return profile_from_projected(m.kernel(), m.weights(), project_points(m.locations(), rotation), p);
}

}  // namespace rtomo
