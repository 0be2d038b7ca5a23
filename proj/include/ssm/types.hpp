#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace ssm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Vec3i = Eigen::Vector3i;

// Points stacked one per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;

/// Proper rigid motion z = R x + t, with R orthonormal and det(R) = +1.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  Points apply(const Points& pts) const {
    Points out = pts * rotation.transpose();
    out.rowwise() += translation.transpose();
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
  }

  // this ∘ other: apply `other` first.
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
  }

  double orthonormality_error() const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  }

  bool is_rigid(double tol = 1e-9) const {
    return orthonormality_error() < tol && std::abs(rotation.determinant() - 1.0) < 10 * tol;
  }

  /// Rotation angle in radians, in [0, pi].
  double angle() const {
    // atan2 keeps full precision near 0 and pi, unlike acos of the trace
    Vec3 w(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
           rotation(1, 0) - rotation(0, 1));
    double c = (rotation.trace() - 1.0) / 2.0;
    return std::atan2(0.5 * w.norm(), c);
  }
};

inline RigidTransform rotation_about(const Vec3& axis, double angle_rad) {
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
  return t;
}

}  // namespace ssm
