#pragma once

#include <Eigen/Dense>

namespace nearnet {

/// A proper rotation of 3D space. 2D rotations are rotations about +Z.
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}

  /// Throws ValidationError unless `m` is orthonormal with determinant +1 (tolerance 1e-9).
  explicit Rotation(const Eigen::Matrix3d& m);

  static Rotation about_x(double radians);
  static Rotation about_y(double radians);
  static Rotation about_z(double radians);
  static Rotation planar(double radians) { return about_z(radians); }
  static Rotation axis_angle(const Eigen::Vector3d& axis, double radians);
  /// Smallest rotation taking unit vector `from` onto unit vector `to`.
  static Rotation aligning(const Eigen::Vector3d& from, const Eigen::Vector3d& to);

  const Eigen::Matrix3d& matrix() const { return m_; }
  Rotation inverse() const { return Rotation(m_.transpose(), Unchecked{}); }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_, Unchecked{}); }

  /// True if the rotation maps the XY plane onto itself (usable on 2D grids).
  bool is_planar() const;

 private:
  struct Unchecked {};
  Rotation(const Eigen::Matrix3d& m, Unchecked) : m_(m) {}

  Eigen::Matrix3d m_;
};

}  // namespace nearnet
