#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "stcal/math_util.hpp"
#include "stcal/screw.hpp"
#include "stcal/trajectory.hpp"

namespace stcal {

// One hand/eye relative-motion pair; the atom of the linear system. Both members are
// sign-canonicalized by construction (nonnegative standard scalar part), which the
// 6x8 block derivation relies on.
struct RelativePosePair {
  DualQuat hand_rel;  // q_{HiHj}
  DualQuat eye_rel;   // q_{EiEj}
  int i = 0, j = 0;   // source grid indices
  double weight = 1.0;
};

enum class PairStrategy { rotconstr, global, interframe };

struct CalibrationConfig {
  double eta = deg2rad(5.0);    // rotational threshold for pair construction
  double mu = 5.0;              // robust kernel gain
  double phi = deg2rad(0.5);    // inlier rotation threshold
  double psi = 0.02;            // inlier translation threshold (m)
  int max_iterations = 200;     // RANSAC iterations
  std::uint64_t rng_seed = 0;
  int min_inliers = 10;
  PairStrategy strategy = PairStrategy::rotconstr;
  bool robust_kernel = true;
  double pair_rate = 0.0;       // shared-grid rate for pair construction; 0 = min(native)
};

struct CalibrationResult {
  DualQuat extrinsic;             // q_HE
  double dt = 0.0;                // carried from time alignment (t_hand = t_eye + dt)
  std::vector<char> inlier_mask;  // over the pair list
  double quality = 0.0;           // sigma7 / sigma6 of the winning weighted system
  int iterations_used = 0;
  int inlier_count = 0;
  int pair_count = 0;
};

// Greedy forward scan on a shared grid: from anchor i, the first j with
// rotation_angle(hand_rel) >= eta closes a pair and becomes the next anchor.
// Pairs touching gap-flagged eye samples are dropped.
std::vector<RelativePosePair> build_relative_pairs(const Trajectory& hand, const Trajectory& eye,
                                                   double eta,
                                                   const std::vector<char>* eye_gaps = nullptr);

// Baseline constructions for the ablations: relative to frame 0 (global) or between
// successive frames (interframe). No rotational constraint.
std::vector<RelativePosePair> build_pairs_strategy(const Trajectory& hand, const Trajectory& eye,
                                                   PairStrategy strategy, double eta,
                                                   const std::vector<char>* eye_gaps = nullptr);

// 6x8 coefficient block S of [r-s, (r+s)^, 0, 0; r'-s', (r'+s')^, r-s, (r+s)^] acting on
// the unknown [q_HE.w, q_HE.xyz, q'_HE.w, q'_HE.xyz]; S x = 0 exactly on noise-free pairs.
Eigen::Matrix<double, 6, 8> coefficient_block(const RelativePosePair& pair);

// Screw-consistency score E >= 1 from the scalar parts; 1 iff the screw congruence
// constraint holds exactly. A vanishing omega denominator is a DegeneratePair (dropped);
// a vanishing omega' denominator skips the second ratio (treated as 1).
double screw_consistency_E(const RelativePosePair& pair);

// W = exp(mu (1 - E^2)) in (0, 1].
double robust_weight(double E, double mu);

struct LinearSystem {
  std::vector<Eigen::Matrix<double, 6, 8>> blocks;
  std::vector<double> weights;
  Eigen::MatrixXd stacked() const;  // [w1 S1; w2 S2; ...], 6n x 8
};

struct SvdSolve {
  DualQuat extrinsic;
  double sigma_ratio;  // sigma7 / sigma6
};

// Null-space solve with the unit and Pluecker constraints enforced through the
// two-smallest-singular-vector combination (quadratic root selection).
SvdSolve solve_dq_svd(const LinearSystem& system);

// Residual x * eye_rel * x^-1 * hand_rel^-1 below both thresholds.
bool inlier_check(const DualQuat& x, const RelativePosePair& pair, double phi, double psi);

// Algorithm: RANSAC over 2-pair minimal samples, per-iteration inlier classification,
// robust-kernel weighted re-solve, best model by smallest sigma7/sigma6
// (ties broken by iteration index, so the result is schedule-independent).
CalibrationResult ransac_calibrate(const std::vector<RelativePosePair>& pairs,
                                   const CalibrationConfig& cfg);

}  // namespace stcal
