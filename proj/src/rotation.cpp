#include "nearnet/rotation.hpp"

#include <cmath>

#include "nearnet/error.hpp"

namespace nearnet {

namespace {
constexpr double kTol = 1e-9;
}

Rotation::Rotation(const Eigen::Matrix3d& m) : m_(m) {
  if (!m.allFinite()) throw ValidationError("rotation matrix has non-finite entries");
  if ((m * m.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kTol)
    throw ValidationError("rotation matrix is not orthonormal");
  if (std::abs(m.determinant() - 1.0) > kTol)
    throw ValidationError("rotation matrix determinant is not +1");
}

Rotation Rotation::about_x(double a) { return axis_angle(Eigen::Vector3d::UnitX(), a); }
Rotation Rotation::about_y(double a) { return axis_angle(Eigen::Vector3d::UnitY(), a); }
Rotation Rotation::about_z(double a) { return axis_angle(Eigen::Vector3d::UnitZ(), a); }

Rotation Rotation::axis_angle(const Eigen::Vector3d& axis, double radians) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(radians))
    throw ValidationError("axis-angle rotation needs a nonzero axis and finite angle");
  Eigen::Matrix3d m = Eigen::AngleAxisd(radians, axis / n).toRotationMatrix();
  // snap round-off so quarter turns map lattice points exactly
  for (int i = 0; i < 9; ++i) {
    double& v = m.data()[i];
    const double r = std::round(v);
    if (std::abs(v - r) < 1e-15) v = r;
  }
  return Rotation(m, Unchecked{});
}

Rotation Rotation::aligning(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(from, to);
  return Rotation(q.normalized().toRotationMatrix(), Unchecked{});
}

bool Rotation::is_planar() const {
  return std::abs(m_(2, 2) - 1.0) < kTol && std::abs(m_(0, 2)) < kTol && std::abs(m_(1, 2)) < kTol;
}

}  // namespace nearnet
