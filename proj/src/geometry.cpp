#include "rtomo/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rtomo/error.hpp"

namespace rtomo {
namespace {

void check_dim(int d) {
  if (d != 2 && d != 3) throw InvalidArgument("unsupported dimension " + std::to_string(d));
}

}  // namespace

Rotation::Rotation(Eigen::MatrixXd entries) : m_(std::move(entries)) {
  if (m_.rows() != m_.cols()) throw InvalidArgument("rotation matrix must be square");
  check_dim(static_cast<int>(m_.rows()));
  const Eigen::MatrixXd gram = m_ * m_.transpose();
  const auto id = Eigen::MatrixXd::Identity(m_.rows(), m_.cols());
  if ((gram - id).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("matrix is not orthogonal");
  if (std::abs(m_.determinant() - 1.0) > 1e-12) throw InvalidArgument("determinant is not +1");
}

Rotation Rotation::identity(int d) {
  check_dim(d);
  return Rotation(Eigen::MatrixXd::Identity(d, d), Unchecked{});
}

Rotation Rotation::operator*(const Rotation& rhs) const {
  if (dim() != rhs.dim()) throw InvalidArgument("rotation dimension mismatch");
  return Rotation(m_ * rhs.m_, Unchecked{});
}

Rotation Rotation::inverse() const { return Rotation(m_.transpose(), Unchecked{}); }

Rotation planar_rotation(double angle) {
  Eigen::MatrixXd m(2, 2);
  const double c = std::cos(angle), s = std::sin(angle);
  m << c, -s, s, c;
  return Rotation(m);
}

Rotation axis_rotation(int axis, double angle) {
  if (axis < 0 || axis > 2) throw InvalidArgument("axis must be 0, 1 or 2");
  const int a = (axis + 1) % 3, b = (axis + 2) % 3;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  const double c = std::cos(angle), s = std::sin(angle);
  m(a, a) = c;
  m(a, b) = -s;
  m(b, a) = s;
  m(b, b) = c;
  return Rotation(m);
}

Projector::Projector(int d) : d_(d) { check_dim(d); }

Eigen::MatrixXd Projector::matrix() const {
  return Eigen::MatrixXd::Identity(d_ - 1, d_);
}

Rotation sample_rotation(int d, Rng& rng) {
  check_dim(d);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (d == 2) {
    const double angle = two_pi * unit(rng);
    Eigen::MatrixXd m(2, 2);
    const double c = std::cos(angle), s = std::sin(angle);
    m << c, -s, s, c;
    return Rotation(std::move(m), Rotation::Unchecked{});
  }
  const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double x = a * std::sin(two_pi * u2), y = a * std::cos(two_pi * u2);
  const double z = b * std::sin(two_pi * u3), w = b * std::cos(two_pi * u3);
  Eigen::MatrixXd m(3, 3);
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return Rotation(std::move(m), Rotation::Unchecked{});
}

Eigen::VectorXd project_location(const Eigen::VectorXd& mu, const Rotation& rotation,
                                 const Projector& projector) {
  if (mu.size() != rotation.dim() || projector.dim() != rotation.dim())
    throw InvalidArgument("dimension mismatch in project_location");
  return (rotation.matrix() * mu).head(rotation.dim() - 1);
}

Eigen::MatrixXd project_points(const Eigen::MatrixXd& points, const Rotation& rotation) {
  if (points.rows() != rotation.dim()) throw InvalidArgument("dimension mismatch in project_points");
  return rotation.matrix().topRows(rotation.dim() - 1) * points;
}

}  // namespace rtomo
