#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "stcal/linear_calibration.hpp"
#include "stcal/screw.hpp"
#include "stcal/trajectory.hpp"

namespace stcal {

struct AlignmentSE3 {
  Quat rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * rotation.rotate(p) + translation;
  }
};

// Least-squares rigid (or similarity) transform minimizing sum |dst - (s R src + t)|^2,
// SVD construction with the reflection (determinant) correction.
AlignmentSE3 umeyama_align(const std::vector<Eigen::Vector3d>& src,
                           const std::vector<Eigen::Vector3d>& dst, bool with_scale = false);

// Apply the calibration to the raw hand trajectory: per-sample pose * extrinsic, stamps
// moved onto the eye clock (t_eye = t_hand - dt). The global frame difference T_WG is
// left for umeyama_align downstream.
Trajectory transform_ground_truth(const Trajectory& hand, const CalibrationResult& result);

struct MetricReport {
  double ape_rmse = 0.0;      // m
  double are_rmse = 0.0;      // deg
  std::vector<double> per_sample_pos_err;   // m
  std::vector<double> per_sample_rot_err;   // deg
  std::vector<double> matched_times;        // est-side absolute stamps
  int matched_count = 0;
};

// Nearest-timestamp association within max_dt; inputs must already share one clock and
// be globally aligned (this function does not align).
MetricReport compute_ape_are(const Trajectory& est, const Trajectory& gt, double max_dt = 0.01);

// Left residual est * ref^-1 -> (translation norm in m, rotation angle in deg).
std::pair<double, double> extrinsic_error(const DualQuat& est, const DualQuat& ref);

// Norm of the translation part of extrinsic_a * extrinsic_b^-1 (marker-displacement
// protocol; compared externally against the measured shift).
double relative_translation_check(const CalibrationResult& a, const CalibrationResult& b);

// Full evaluation pipeline: transform the raw hand trajectory with the calibration,
// optionally Umeyama-align it to the estimate, then run the metrics.
struct EvaluationOutcome {
  MetricReport metrics;
  AlignmentSE3 alignment;
  Trajectory aligned_gt;
};

EvaluationOutcome evaluate_against_ground_truth(const Trajectory& est, const Trajectory& hand_raw,
                                                const CalibrationResult& calib,
                                                bool with_scale = false, double max_dt = 0.01,
                                                bool umeyama = true);

}  // namespace stcal
