#pragma once

#include <vector>

#include "stcal/trajectory.hpp"

namespace stcal {

// Angular speed sampled on a uniform grid; value[i] is the forward-difference rotation
// rate between grid poses i and i+1 (rad/s). Invariant to any fixed left-composition of
// the source trajectory, which is what makes the time offset estimable before any
// spatial calibration.
struct AngularSpeedSignal {
  double rate = 0.0;           // Hz
  std::vector<double> values;  // rad/s, length = grid length - 1
  double t0 = 0.0;             // absolute epoch of the first grid sample (s)
};

// Convention, fixed project-wide: t_hand = t_eye + dt.
struct TimeOffsetEstimate {
  double dt = 0.0;
  double peak_correlation = 0.0;
  bool curvature_ok = false;
  bool reliable = false;  // peak_correlation >= threshold && curvature_ok
};

struct AlignConfig {
  double correlation_rate = 0.0;  // Hz; 0 selects min(native rates)
  double min_overlap = 5.0;       // s
  double reliability_threshold = 0.6;
};

AngularSpeedSignal angular_speed(const Trajectory& traj, double rate);

// Zero-mean normalized cross-correlation over every integer lag with enough overlap,
// computed through a frequency-domain product with zero padding. values[k] corresponds
// to lag first_lag + k, where lag L aligns a[i] with b[i - L].
struct Correlation {
  std::vector<double> values;
  int first_lag = 0;
  int lag(std::size_t k) const { return first_lag + static_cast<int>(k); }
};

Correlation cross_correlate(const AngularSpeedSignal& a, const AngularSpeedSignal& b);

// Quadratic refinement around a discrete peak: parabola through the three samples,
// fractional offset delta = 0.5 (c- - c+) / (c- - 2 c0 + c+), clamped to [-0.5, 0.5].
struct PeakRefinement {
  double index = 0.0;  // peak_index + delta
  bool curvature_ok = false;
};

PeakRefinement refine_peak(const std::vector<double>& corr, int peak_index);

TimeOffsetEstimate estimate_time_offset(const Trajectory& hand, const Trajectory& eye,
                                        const AlignConfig& cfg = {});

// Integer-peak-only variant (no quadratic refinement); the ablation baseline.
TimeOffsetEstimate estimate_time_offset_unrefined(const Trajectory& hand, const Trajectory& eye,
                                                  const AlignConfig& cfg = {});

}  // namespace stcal
