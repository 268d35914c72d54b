#pragma once

#include <Eigen/Core>
#include <vector>

#include "stcal/screw.hpp"
#include "stcal/trajectory.hpp"

namespace stcal {

// Lightweight pose for the continuous-time machinery (rotation quaternion + translation).
struct PoseRT {
  Quat rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

inline PoseRT compose(const PoseRT& a, const PoseRT& b) {
  return {(a.rotation * b.rotation).normalized(), a.translation + a.rotation.rotate(b.translation)};
}

inline PoseRT inverse(const PoseRT& a) {
  const Quat rc = a.rotation.conjugate();
  return {rc, -rc.rotate(a.translation)};
}

inline DualQuat to_dual_quat(const PoseRT& p) { return DualQuat::from_rt(p.rotation, p.translation); }
inline PoseRT to_pose_rt(const DualQuat& q) { return {q.rotation(), q.translation()}; }

// Continuous-time pose model on uniform knots: cumulative B-spline on SO(3)
//   q(t) = q_l * prod_j EXP(lambda_j(t) LOG(q_{l+j-1}^-1 q_{l+j}))
// with the standard recursive basis accumulated into lambda_j, plus an ordinary
// vector-space B-spline of the same order and knots for translation.
//
// Knots t_i = first_knot + i*spacing, i = 0..N-1 with N = vertices + order; the valid
// domain is [t_{order-1}, t_{N-order}).
class SplinePose {
public:
  SplinePose(int order, double first_knot, double knot_spacing, std::vector<Quat> rot_vertices,
             std::vector<Eigen::Vector3d> trans_vertices);

  int order() const { return order_; }
  double knot_spacing() const { return spacing_; }
  double first_knot() const { return first_knot_; }
  int num_vertices() const { return static_cast<int>(rot_vertices_.size()); }
  int num_knots() const { return num_vertices() + order_; }

  double domain_start() const { return knot(order_ - 1); }
  double domain_end() const { return knot(num_vertices()); }
  double knot(int i) const { return first_knot_ + spacing_ * i; }

  PoseRT eval(double t) const;
  Quat eval_rotation(double t) const;
  Eigen::Vector3d eval_translation(double t) const;

  // Nonzero standard basis values at t: weights[r] multiplies vertex (first + r),
  // r = 0..order-1. weights must hold order() doubles.
  void basis_weights(double t, int& first_vertex, double* weights) const;

  // Cumulative weights lambda_j, j = 1..order-1 (lambda[0] unused, set to 1).
  void cumulative_weights(double t, int& first_vertex, double* lambda) const;

  const std::vector<Quat>& rot_vertices() const { return rot_vertices_; }
  const std::vector<Eigen::Vector3d>& trans_vertices() const { return trans_vertices_; }
  std::vector<Quat>& rot_vertices() { return rot_vertices_; }
  std::vector<Eigen::Vector3d>& trans_vertices() { return trans_vertices_; }

  // Re-establish dot(q_k, q_{k+1}) >= 0 so segment logs take the short arc.
  void sign_align_rot_vertices();

private:
  int segment_index(double t) const;  // throws OutOfDomain

  int order_;
  double first_knot_;
  double spacing_;
  std::vector<Quat> rot_vertices_;
  std::vector<Eigen::Vector3d> trans_vertices_;
};

struct SplineFit {
  SplinePose spline;
  double max_rot_residual;    // rad
  double max_trans_residual;  // m
};

// Uniform-knot least-squares fit: linear solve for translation vertices, nearest-sample
// initialization plus 5 Gauss-Newton sweeps on geodesic residuals for rotation vertices.
SplineFit fit_spline(const Trajectory& traj, int order = 4, double knot_spacing = 0.1);

}  // namespace stcal
