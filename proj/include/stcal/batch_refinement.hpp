#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "stcal/linear_calibration.hpp"
#include "stcal/spline.hpp"
#include "stcal/trajectory.hpp"

namespace stcal {

struct RefinementConfig {
  int order = 4;
  double knot_spacing = 0.1;      // s
  double huber_rot = deg2rad(0.5);
  double huber_trans = 0.02;      // m
  // Isotropic diagonal covariances; the hand (MoCap) is 10x tighter than the eye (VIO).
  double sigma_rot_hand = deg2rad(0.02);
  double sigma_trans_hand = 0.5e-3;
  double sigma_rot_eye = deg2rad(0.2);
  double sigma_trans_eye = 5e-3;
  int max_iterations = 100;
  double cost_rel_tol = 1e-9;
  double grad_tol = 1e-10;
  double max_boundary_drop = 0.02;  // fraction of eye samples allowed to fall off the spline
};

// Joint refinement state: hand observations modeled by a continuous-time spline, eye
// observations tied to it through the extrinsic and the clock offset
//   eye_model(t) = spline(t + dt) * extrinsic   (relative residuals cancel T_WG).
struct RefinementProblem {
  Trajectory hand_obs;
  Trajectory eye_obs;
  SplinePose spline;
  DualQuat extrinsic;
  double dt = 0.0;
  RefinementConfig cfg;
};

// Spline fitted to the hand observations; extrinsic/dt from the linear stage.
RefinementProblem make_refinement_problem(const Trajectory& hand, const Trajectory& eye,
                                          const DualQuat& extrinsic_init, double dt_init,
                                          const RefinementConfig& cfg = {});

// d(Ta, Tb, Ta_obs, Tb_obs): 6-vector [rotation log (rad); translation (m)] of
// (Ta^-1 Tb) (Ta_obs^-1 Tb_obs)^-1; invariant to a shared left transform on the
// observations.
Eigen::Matrix<double, 6, 1> relative_residual(const PoseRT& ta, const PoseRT& tb,
                                              const PoseRT& ta_obs, const PoseRT& tb_obs);

// Analytic Jacobians of relative_residual w.r.t. the model poses, in the right-rotation /
// world-translation perturbation convention; columns [dtheta_a, dt_a, dtheta_b, dt_b].
void relative_residual_jacobians(const PoseRT& ta, const PoseRT& tb, const PoseRT& ta_obs,
                                 const PoseRT& tb_obs, Eigen::Matrix<double, 6, 6>& Ja,
                                 Eigen::Matrix<double, 6, 6>& Jb);

// Huber- and covariance-weighted sum over consecutive hand and eye observation pairs.
double total_cost(const RefinementProblem& problem);

struct RefinementReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  bool diverged = false;  // no accepted step and the gradient was not small
  std::string termination;
  std::vector<std::string> numeric_blocks;  // parameter blocks differentiated numerically
  int dropped_eye_pairs = 0;
  bool dt_hit_trust_region = false;
};

struct RefinementResult {
  DualQuat extrinsic;
  double dt = 0.0;
  SplinePose spline;
  RefinementReport report;
};

// Levenberg-Marquardt over spline vertices, extrinsic (log-map local parameterization)
// and dt (trust region of half the median eye period). Accepted steps never increase the
// cost; on divergence the initial values are returned tagged as such.
RefinementResult refine(const RefinementProblem& problem);

// SO(3) right-Jacobian inverse (exposed for the Jacobian verification tests).
Eigen::Matrix3d so3_right_jacobian_inverse(const Eigen::Vector3d& phi);

}  // namespace stcal
