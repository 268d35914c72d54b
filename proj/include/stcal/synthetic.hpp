#pragma once

#include <cstdint>

#include "stcal/spline.hpp"
#include "stcal/trajectory.hpp"

namespace stcal {

// Ten-level noise schedule: level k maps to k*0.5 mm and k*0.02 deg per-frame standard
// deviations (level 10 = 5 mm / 0.2 deg).
struct NoiseLevels {
  int level = 0;
  double trans_sigma = 0.0;    // m per frame
  double rot_sigma = 0.0;      // rad per frame
  std::uint64_t rng_seed = 0;

  static NoiseLevels from_level(int level, std::uint64_t seed);
};

struct GroundTruthBundle {
  Trajectory hand;       // noise-free, hand_rate
  Trajectory eye_clean;  // noise-free, eye_rate, distinct global frame
  Trajectory eye_noisy;  // eye_clean with cumulative drift
  DualQuat extrinsic_gt;
  double dt_gt = 0.0;    // convention t_hand = t_eye + dt
};

enum class MotionPreset { figure8, random_walk, spin_rich };

// Procedural order-4 motion model with rotational excitation about >= 2 axes.
SplinePose build_motion_model(MotionPreset preset, double span_s, std::uint64_t seed = 1);

// Fit a model to a recorded trajectory; throws InsufficientRotation when the motion
// spins about a single axis only.
SplinePose build_motion_model(const Trajectory& seed_traj, int order = 4,
                              double knot_spacing = 0.1);

// Rough single-axis check used by build_motion_model (exposed for tests): ratio of the
// second to first eigenvalue of the rotation-axis scatter.
double rotation_axis_spread(const SplinePose& model);

// Dual-rate sampling with known extrinsic and clock offset. The eye pose at eye-time t is
//   global_offset * model(t + dt) * extrinsic
// and eye stamps are inset by a fixed guard (independent of dt) so the correlation search
// sees a genuine non-trivial lag.
GroundTruthBundle sample_hand_eye(const SplinePose& model, const DualQuat& extrinsic, double dt,
                                  double hand_rate, double eye_rate,
                                  const NoiseLevels& noise = {}, double stamp_guard = 2.5);

// Frame-wise cumulative error: per-frame right-composed random walk, deterministic in
// the seed. Level 0 returns the input unchanged.
Trajectory inject_drift(const Trajectory& traj, const NoiseLevels& noise);

// Convenience wrapper used by the CLI and the test suites.
struct SimConfig {
  MotionPreset preset = MotionPreset::figure8;
  int level = 0;
  std::uint64_t seed = 1;
  double span = 36.0;       // model span, s
  double hand_rate = 100.0;
  double eye_rate = 20.0;
  bool randomize_xdt = true;  // draw extrinsic/dt from the seed; else use the fixed defaults
  DualQuat extrinsic;
  double dt = 0.25;
};

GroundTruthBundle simulate(const SimConfig& cfg);

}  // namespace stcal
