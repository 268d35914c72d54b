#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stcal/batch_refinement.hpp"
#include "stcal/evaluation.hpp"
#include "stcal/linear_calibration.hpp"
#include "stcal/synthetic.hpp"
#include "stcal/time_alignment.hpp"

namespace stcal {

// Per-pair diagnostics emitted next to the calibration result.
struct PairDiagnostics {
  int i, j;
  double t_i, t_j;           // absolute grid times
  double hand_angle;         // rad
  double eye_angle;          // rad
  double consistency_E;      // 0 when degenerate
  double weight;
  bool inlier;
};

struct CalibrationOutput {
  CalibrationResult result;
  TimeOffsetEstimate time_offset;
  std::vector<PairDiagnostics> diagnostics;
  double grid_rate = 0.0;
};

// align -> shift -> shared grid (anchored on the shifted eye samples) -> pairs -> RANSAC.
// When dt_override is set the correlation stage is skipped (used by the oracles).
CalibrationOutput calibrate_trajectories(const Trajectory& hand, const Trajectory& eye,
                                         const CalibrationConfig& calib_cfg = {},
                                         const AlignConfig& align_cfg = {},
                                         std::optional<double> dt_override = std::nullopt);

// Errors of a calibration against the generator truth:
// (translation m, rotation deg, |dt error| s).
struct CalibrationErrors {
  double trans = 0.0;
  double rot = 0.0;
  double dt = 0.0;
};

CalibrationErrors errors_against_truth(const CalibrationResult& result,
                                       const GroundTruthBundle& truth);

// Ablation grid runner (strategy x level x seed), parallel over runs, rows sorted so the
// CSV is byte-identical for any job count.
struct AblationVariant {
  std::string name;
  PairStrategy strategy = PairStrategy::rotconstr;
  double eta = deg2rad(5.0);
  bool robust_kernel = true;
};

struct AblationRow {
  std::string variant;
  int level = 0;
  std::uint64_t seed = 0;
  double trans_err = 0.0;   // m
  double rot_err = 0.0;     // deg
  double time_err = 0.0;    // s
  std::string status;       // "ok" or the error tag
};

struct AblationSpec {
  std::vector<AblationVariant> variants;
  std::vector<int> levels;
  std::vector<std::uint64_t> seeds;
  SimConfig sim;            // preset/span/rates; level+seed filled per run
  int jobs = 1;
  int ransac_iterations = 200;
};

std::vector<AblationRow> run_ablation(const AblationSpec& spec);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace stcal
