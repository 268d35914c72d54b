#include "stcal/screw.hpp"

namespace stcal {

Eigen::Matrix3d Quat::to_matrix() const {
  const double ww = w * w, xx = x * x, yy = y * y, zz = z * z;
  const double wx = w * x, wy = w * y, wz = w * z;
  const double xy = x * y, xz = x * z, yz = y * z;
  Eigen::Matrix3d R;
  R << ww + xx - yy - zz, 2 * (xy - wz), 2 * (xz + wy),
       2 * (xy + wz), ww - xx + yy - zz, 2 * (yz - wx),
       2 * (xz - wy), 2 * (yz + wx), ww - xx - yy + zz;
  return R;
}

Quat Quat::from_matrix(const Eigen::Matrix3d& R) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  const double tr = R.trace();
  Quat q;
  if (tr > 0.0) {
    const double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (R(2, 1) - R(1, 2)) / s;
    q.y = (R(0, 2) - R(2, 0)) / s;
    q.z = (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    const double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    q.w = (R(2, 1) - R(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (R(0, 1) + R(1, 0)) / s;
    q.z = (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    const double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    q.w = (R(0, 2) - R(2, 0)) / s;
    q.x = (R(0, 1) + R(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (R(1, 2) + R(2, 1)) / s;
  } else {
    const double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    q.w = (R(1, 0) - R(0, 1)) / s;
    q.x = (R(0, 2) + R(2, 0)) / s;
    q.y = (R(1, 2) + R(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.normalized();
}

DualQuat DualQuat::from_matrix(const Eigen::Matrix4d& T) {
  return from_rt(Quat::from_matrix(T.topLeftCorner<3, 3>()), T.topRightCorner<3, 1>());
}

Eigen::Matrix4d DualQuat::to_matrix() const {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() = real_.to_matrix();
  T.topRightCorner<3, 1>() = translation();
  return T;
}

ScrewParams screw_decompose(const DualQuat& q) {
  ScrewParams p;
  const double w = std::abs(q.real().w);
  p.theta = 2.0 * safe_acos(std::min(w, 1.0));
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));  // sin(theta/2)

  if (p.theta < kDegenerateScrewAngle || s < 1e-12) {
    p.degenerate = true;
    // best effort for a (near-)pure translation: axis along t, d = |t|
    const Eigen::Vector3d t = q.translation();
    const double tn = t.norm();
    if (tn > 1e-12) {
      p.d = tn;
      p.axis = t / tn;
    }
    return p;
  }

  p.axis = q.real().vec() / s;
  const double omega_prime = q.dual().w;
  p.d = -2.0 * omega_prime / s;
  // dual vector = (d/2) cos(theta/2) axis + sin(theta/2) moment
  p.moment = (q.dual().vec() - (0.5 * p.d * q.real().w) * p.axis) / s;
  return p;
}

DualQuat screw_compose(const ScrewParams& p) {
  const double h = 0.5 * p.theta;
  const double c = std::cos(h), s = std::sin(h);
  const Quat real(c, s * p.axis.x(), s * p.axis.y(), s * p.axis.z());
  const Eigen::Vector3d dv = (0.5 * p.d * c) * p.axis + s * p.moment;
  const Quat dual(-0.5 * p.d * s, dv.x(), dv.y(), dv.z());
  return DualQuat::from_parts(real, dual);
}

}  // namespace stcal
