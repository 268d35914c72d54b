#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace stcal {

constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// arccos with the argument clamped into [-1, 1]; inputs like 1 + 1e-15 must not produce NaN.
inline double safe_acos(double v) { return std::acos(std::clamp(v, -1.0, 1.0)); }

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

}  // namespace stcal
