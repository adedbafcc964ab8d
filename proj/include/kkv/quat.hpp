#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace kkv {

// Scalar-first unit quaternion (w, x, y, z); identity is (1,0,0,0).
// Hamilton product convention, body rates on the right:
//   qdot = 1/2 q (0, omega_B).
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {}; }

  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }

  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

  double norm() const { return std::sqrt(dot(*this)); }

  Quat normalized() const {
    const double n = norm();
    if (!(n > 0.0)) throw std::invalid_argument("Quat::normalized: zero norm");
    return {w / n, x / n, y / n, z / n};
  }

  bool finite() const {
    return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }

  // Attitude change of `angle` radians about a unit axis.
  static Quat from_axis_angle(const Eigen::Vector3d& axis, double angle) {
    const double h = 0.5 * angle;
    const double s = std::sin(h);
    return {std::cos(h), s * axis.x(), s * axis.y(), s * axis.z()};
  }

  // Shortest rotation taking unit vector `from` onto unit vector `to`.
  static Quat between(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
    const double c = from.dot(to);
    if (c < -1.0 + 1e-12) {
      // Antiparallel: rotate pi about any axis orthogonal to `from`.
      Eigen::Vector3d axis = from.cross(Eigen::Vector3d::UnitX());
      if (axis.squaredNorm() < 1e-12) axis = from.cross(Eigen::Vector3d::UnitY());
      axis.normalize();
      return from_axis_angle(axis, M_PI);
    }
    const Eigen::Vector3d axis = from.cross(to);
    Quat q{1.0 + c, axis.x(), axis.y(), axis.z()};
    return q.normalized();
  }
};

// Inertial-to-body direction cosine matrix C_BN for attitude q.
// Body-to-inertial is the transpose. Satisfies
//   dcm_from_quat(q1*q2) == dcm_from_quat(q2) * dcm_from_quat(q1).
inline Eigen::Matrix3d dcm_from_quat(const Quat& q) {
  if (!q.finite()) throw std::invalid_argument("dcm_from_quat: non-finite quaternion");
  const double n2 = q.dot(q);
  if (std::abs(n2 - 1.0) > 2e-6) throw std::invalid_argument("dcm_from_quat: quaternion not unit norm");
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Eigen::Matrix3d c;
  c << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y),
       2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z + w * x),
       2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y);
  return c;
}

// Quaternion kinematics qdot = 1/2 Omega(q) (0, w0, w1, w2), returned scalar-first.
inline Eigen::Vector4d quat_derivative(const Quat& q, const Eigen::Vector3d& omega_body) {
  if (!q.finite() || !omega_body.allFinite()) {
    throw std::invalid_argument("quat_derivative: non-finite input");
  }
  const double w0 = omega_body.x(), w1 = omega_body.y(), w2 = omega_body.z();
  return 0.5 * Eigen::Vector4d(-q.x * w0 - q.y * w1 - q.z * w2,
                               q.w * w0 - q.z * w1 + q.y * w2,
                               q.z * w0 + q.w * w1 - q.x * w2,
                               -q.y * w0 + q.x * w1 + q.w * w2);
}

}  // namespace kkv
