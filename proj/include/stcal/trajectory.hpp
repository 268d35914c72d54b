#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stcal/screw.hpp"

namespace stcal {

struct PoseSample {
  double t = 0.0;  // seconds, relative to the trajectory epoch
  DualQuat pose;
};

// Time-ordered pose samples in one frame convention. Timestamps are stored relative
// to an epoch (the first stamp of the source file) so double precision survives
// nanosecond-resolution absolute clocks; absolute time = epoch + t.
class Trajectory {
public:
  Trajectory() = default;
  Trajectory(std::vector<PoseSample> samples, std::string frame_label = {}, double epoch = 0.0);

  const std::vector<PoseSample>& samples() const { return samples_; }
  const PoseSample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  double epoch() const { return epoch_; }
  const std::string& frame_label() const { return frame_label_; }

  double abs_time(std::size_t i) const { return epoch_ + samples_[i].t; }
  double abs_start() const { return epoch_ + samples_.front().t; }
  double abs_end() const { return epoch_ + samples_.back().t; }
  double duration() const { return samples_.back().t - samples_.front().t; }

  // 1 / median sample period.
  double native_rate() const;
  double median_period() const;

private:
  std::vector<PoseSample> samples_;
  std::string frame_label_;
  double epoch_ = 0.0;
};

enum class TrajectoryFormat { tum, euroc_csv };

// TUM: "t tx ty tz qx qy qz qw", '#' comments; EuRoC: header line + first 8 CSV columns
// "timestamp_ns,px,py,pz,qw,qx,qy,qz". Quaternions are normalized on ingest; out-of-order
// rows are rejected.
Trajectory parse_trajectory(std::istream& in, TrajectoryFormat format, std::string frame_label = {});
Trajectory load_trajectory(const std::string& path, TrajectoryFormat format,
                           std::string frame_label = {});

// TUM text with 17 significant digits (quaternion written x y z w, per the on-disk convention).
void write_tum(std::ostream& out, const Trajectory& traj);
void save_tum(const std::string& path, const Trajectory& traj);

// Pose at absolute time t: shortest-arc spherical interpolation for rotation, linear for
// translation, between the bracketing samples. No extrapolation.
DualQuat interpolate_at(const Trajectory& traj, double t_abs);

// Uniform grid from the first to the last timestamp at 1/rate spacing.
Trajectory resample(const Trajectory& traj, double rate);

// Resample onto an explicit absolute grid t0 + k/rate, k = 0..count-1. When gap_flags is
// given, it marks grid points whose bracketing source interval exceeds 5x the median
// period (interpolated anyway; downstream stages drop pairs touching them).
Trajectory resample_on_grid(const Trajectory& traj, double t0_abs, double rate,
                            std::size_t count, std::vector<char>* gap_flags = nullptr);

// Every timestamp increased by dt; poses unchanged; inter-sample intervals preserved exactly.
Trajectory shift_time(const Trajectory& traj, double dt);

}  // namespace stcal
