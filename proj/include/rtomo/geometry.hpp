#pragma once

#include <Eigen/Dense>

#include "rtomo/random.hpp"

namespace rtomo {

/// Element of SO(d), d in {2, 3}.
class Rotation {
 public:
  /// Validates orthogonality and det = +1 within 1e-12.
  explicit Rotation(Eigen::MatrixXd entries);
  static Rotation identity(int d);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  Rotation operator*(const Rotation& rhs) const;
  Rotation inverse() const;

 private:
  struct Unchecked {};
  Rotation(Eigen::MatrixXd entries, Unchecked) : m_(std::move(entries)) {}
  Eigen::MatrixXd m_;
  friend Rotation sample_rotation(int d, Rng& rng);
};

/// Rotation by `angle` in the plane.
Rotation planar_rotation(double angle);
/// Rotation by `angle` about a coordinate axis (0, 1, 2) in 3D.
Rotation axis_rotation(int axis, double angle);

/// (d-1) x d matrix keeping the first d-1 coordinates; the discarded last
/// coordinate is the direction of integration.
class Projector {
 public:
  explicit Projector(int d);
  int dim() const { return d_; }
  Eigen::MatrixXd matrix() const;

 private:
  int d_;
};

/// Haar-distributed rotation. d=2: angle uniform on [0, 2*pi). d=3: uniform
/// unit quaternion (Shoemake's subgroup algorithm, three uniforms, no
/// rejection) mapped to its rotation matrix.
Rotation sample_rotation(int d, Rng& rng);

/// H * R * mu.
Eigen::VectorXd project_location(const Eigen::VectorXd& mu, const Rotation& rotation,
                                 const Projector& projector);

/// Projects every column of `points` (d x K) to a (d-1) x K matrix.
Eigen::MatrixXd project_points(const Eigen::MatrixXd& points, const Rotation& rotation);

}  // namespace rtomo
