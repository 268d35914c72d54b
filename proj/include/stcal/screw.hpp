#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>  // cross products
#include <cmath>

#include "stcal/errors.hpp"
#include "stcal/math_util.hpp"

namespace stcal {

// Rotations below this angle have an undefined screw axis; decomposition flags them.
constexpr double kDegenerateScrewAngle = 1e-6;  // rad

// Hamilton quaternion, scalar-first storage (w, x, y, z).
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static Quat identity() { return {}; }
  static Quat pure(const Eigen::Vector3d& v) { return {0.0, v.x(), v.y(), v.z()}; }

  static Quat from_axis_angle(const Eigen::Vector3d& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-15) return identity();
    const double h = 0.5 * angle;
    const double s = std::sin(h) / n;
    return {std::cos(h), s * axis.x(), s * axis.y(), s * axis.z()};
  }

  // EXP: rotation vector -> unit quaternion.
  static Quat exp_map(const Eigen::Vector3d& phi) {
    const double a = phi.norm();
    const double h = 0.5 * a;
    // sinc(h) expansion keeps this smooth through a = 0
    const double k = (a < 1e-8) ? 0.5 - a * a / 48.0 : std::sin(h) / a;
    return {std::cos(h), k * phi.x(), k * phi.y(), k * phi.z()};
  }

  // LOG: unit quaternion -> rotation vector with |result| in [0, pi].
  Eigen::Vector3d log_map() const {
    Quat q = *this;
    if (q.w < 0) q = -q;  // shortest arc
    const double vn = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
    if (vn < 1e-12) return Eigen::Vector3d(2.0 * q.x, 2.0 * q.y, 2.0 * q.z);
    const double angle = 2.0 * std::atan2(vn, q.w);
    const double k = angle / vn;
    return Eigen::Vector3d(k * q.x, k * q.y, k * q.z);
  }

  Eigen::Vector3d vec() const { return {x, y, z}; }
  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }

  Quat normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }

  // Double-cover resolution: w >= 0; ties at w == 0 broken by the first nonzero of (x, y, z).
  Quat canonical() const {
    double s = w;
    if (s == 0.0) s = (x != 0.0) ? x : (y != 0.0) ? y : z;
    return (s < 0.0) ? -*this : *this;
  }

  // Hamilton product.
  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Quat operator+(const Quat& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
  Quat operator-(const Quat& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
  Quat operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
  Quat operator-() const { return {-w, -x, -y, -z}; }

  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const {
    // q v q* expanded: v + 2 w (u x v) + 2 u x (u x v), u = vec()
    const Eigen::Vector3d u = vec();
    const Eigen::Vector3d t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
  }

  Eigen::Matrix3d to_matrix() const;
  static Quat from_matrix(const Eigen::Matrix3d& R);
};

// Chasles decomposition of a rigid motion: rotation theta about a line (axis, moment)
// plus translation d along that axis.
struct ScrewParams {
  double theta = 0.0;  // rad, in [0, pi]
  double d = 0.0;      // m, translation along the screw axis
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();
  bool degenerate = false;  // theta < kDegenerateScrewAngle: axis/d/moment unreliable
};

// Unit dual quaternion q^ = q + eps q', with the translation encoded as q' = 0.5 t (x) q.
// Invariants (|real| = 1, real . dual = 0, canonical sign) are restored on every
// construction and product.
class DualQuat {
public:
  DualQuat() : real_(), dual_(0.0, 0.0, 0.0, 0.0) {}

  // Validates the unit and Pluecker conditions (1e-6), then restores them exactly.
  static DualQuat from_parts(const Quat& real, const Quat& dual) {
    if (std::abs(real.norm() - 1.0) > 1e-6)
      throw InvalidDualQuat("standard part is not unit norm");
    if (std::abs(real.dot(dual)) > 1e-6)
      throw InvalidDualQuat("Pluecker condition violated");
    return DualQuat(real, dual);
  }

  static DualQuat from_rt(const Quat& rotation, const Eigen::Vector3d& translation) {
    if (std::abs(rotation.norm() - 1.0) > 1e-6)
      throw NonUnitRotation("rotation quaternion norm deviates from 1 by more than 1e-6");
    const Quat r = rotation.normalized();
    return DualQuat(r, Quat::pure(translation) * r * 0.5);
  }

  static DualQuat from_matrix(const Eigen::Matrix4d& T);

  const Quat& real() const { return real_; }  // standard part (rotation)
  const Quat& dual() const { return dual_; }

  Quat rotation() const { return real_; }

  Eigen::Vector3d translation() const {
    // t = 2 q' q*  (pure quaternion for unit elements)
    return (dual_ * real_.conjugate()).vec() * 2.0;
  }

  Eigen::Matrix4d to_matrix() const;

  // Dual-quaternion product; a * b chains transform a followed by b in a's frame,
  // matching the homogeneous-matrix product T_a T_b.
  DualQuat operator*(const DualQuat& o) const {
    return DualQuat(real_ * o.real_, real_ * o.dual_ + dual_ * o.real_);
  }

  // Inverse of a unit dual quaternion: quaternion conjugate of both parts.
  DualQuat inverse() const { return DualQuat(real_.conjugate(), dual_.conjugate()); }

private:
  DualQuat(const Quat& r, const Quat& d) : real_(r), dual_(d) { restore_invariants(); }

  void restore_invariants() {
    const double n = real_.norm();
    real_ = real_ * (1.0 / n);
    dual_ = dual_ * (1.0 / n);
    dual_ = dual_ - real_ * real_.dot(dual_);
    double s = real_.w;
    if (s == 0.0) s = (real_.x != 0.0) ? real_.x : (real_.y != 0.0) ? real_.y : real_.z;
    if (s < 0.0) {
      real_ = -real_;
      dual_ = -dual_;
    }
  }

  Quat real_, dual_;
};

struct ScalarPart {
  double omega;        // cos(theta/2)
  double omega_prime;  // -(d/2) sin(theta/2)
};

// Scalar part (q^ + q^-1)/2 in vector form; invariant under conjugation (screw congruence).
inline ScalarPart scalar_part(const DualQuat& q) { return {q.real().w, q.dual().w}; }

ScrewParams screw_decompose(const DualQuat& q);
DualQuat screw_compose(const ScrewParams& p);

// Rotation angle of the encoded transform, in [0, pi].
inline double rotation_angle(const DualQuat& q) {
  return 2.0 * safe_acos(std::abs(q.real().w));
}

// Euclidean norm of the full recovered translation (not the screw-axis component d).
inline double translation_norm(const DualQuat& q) { return q.translation().norm(); }

}  // namespace stcal
