#include "stcal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "stcal/errors.hpp"

namespace stcal {

CalibrationOutput calibrate_trajectories(const Trajectory& hand, const Trajectory& eye,
                                         const CalibrationConfig& calib_cfg,
                                         const AlignConfig& align_cfg,
                                         std::optional<double> dt_override) {
  CalibrationOutput out;
  if (dt_override) {
    out.time_offset.dt = *dt_override;
    out.time_offset.reliable = true;
    out.time_offset.curvature_ok = true;
    out.time_offset.peak_correlation = 1.0;
  } else {
    out.time_offset = estimate_time_offset(hand, eye, align_cfg);
  }
  const double dt = out.time_offset.dt;

  // Move the eye onto the hand clock, then build one shared grid over the overlap,
  // anchored on the shifted eye stamps (the finer-bracket side gets interpolated).
  const Trajectory eye_aligned = shift_time(eye, dt);
  const double lo = std::max(hand.abs_start(), eye_aligned.abs_start());
  const double hi = std::min(hand.abs_end(), eye_aligned.abs_end());
  if (hi - lo < 1.0) throw InsufficientOverlap("time-aligned overlap below 1 s");

  double rate = calib_cfg.pair_rate;
  if (rate <= 0.0) rate = std::min(hand.native_rate(), eye_aligned.native_rate());
  out.grid_rate = rate;

  double t0 = eye_aligned.abs_start();
  while (t0 < lo - 1e-12) t0 += 1.0 / rate;
  const std::size_t count = static_cast<std::size_t>(std::floor((hi - t0) * rate + 1e-9)) + 1;
  if (count < 8) throw InsufficientOverlap("shared grid too short for pair construction");

  std::vector<char> eye_gaps;
  const Trajectory hand_grid = resample_on_grid(hand, t0, rate, count);
  const Trajectory eye_grid = resample_on_grid(eye_aligned, t0, rate, count, &eye_gaps);

  std::vector<RelativePosePair> pairs =
      build_pairs_strategy(hand_grid, eye_grid, calib_cfg.strategy, calib_cfg.eta, &eye_gaps);

  out.result = ransac_calibrate(pairs, calib_cfg);
  out.result.dt = dt;

  out.diagnostics.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    PairDiagnostics d;
    d.i = pairs[k].i;
    d.j = pairs[k].j;
    d.t_i = hand_grid.abs_time(pairs[k].i);
    d.t_j = hand_grid.abs_time(pairs[k].j);
    d.hand_angle = rotation_angle(pairs[k].hand_rel);
    d.eye_angle = rotation_angle(pairs[k].eye_rel);
    try {
      d.consistency_E = screw_consistency_E(pairs[k]);
      d.weight = calib_cfg.robust_kernel ? robust_weight(d.consistency_E, calib_cfg.mu) : 1.0;
    } catch (const DegeneratePair&) {
      d.consistency_E = 0.0;
      d.weight = 0.0;
    }
    d.inlier = out.result.inlier_mask[k] != 0;
    out.diagnostics.push_back(d);
  }
  return out;
}

CalibrationErrors errors_against_truth(const CalibrationResult& result,
                                       const GroundTruthBundle& truth) {
  CalibrationErrors e;
  const auto [trans, rot] = extrinsic_error(result.extrinsic, truth.extrinsic_gt);
  e.trans = trans;
  e.rot = rot;
  e.dt = std::abs(result.dt - truth.dt_gt);
  return e;
}

std::vector<AblationRow> run_ablation(const AblationSpec& spec) {
  struct Task {
    std::size_t variant;
    int level;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t v = 0; v < spec.variants.size(); ++v)
    for (int level : spec.levels)
      for (std::uint64_t seed : spec.seeds) tasks.push_back({v, level, seed});

  std::vector<AblationRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      const Task& task = tasks[k];
      const AblationVariant& var = spec.variants[task.variant];
      AblationRow row;
      row.variant = var.name;
      row.level = task.level;
      row.seed = task.seed;
      try {
        SimConfig sim = spec.sim;
        sim.level = task.level;
        sim.seed = task.seed;
        const GroundTruthBundle bundle = simulate(sim);

        CalibrationConfig cfg;
        cfg.strategy = var.strategy;
        cfg.eta = var.eta;
        cfg.robust_kernel = var.robust_kernel;
        cfg.rng_seed = task.seed;
        cfg.max_iterations = spec.ransac_iterations;
        const CalibrationOutput out =
            calibrate_trajectories(bundle.hand, bundle.eye_noisy, cfg, AlignConfig{});
        const CalibrationErrors err = errors_against_truth(out.result, bundle);
        row.trans_err = err.trans;
        row.rot_err = err.rot;
        row.time_err = err.dt;
        row.status = "ok";
      } catch (const Error& e) {
        row.status = e.what();
      }
      rows[k] = std::move(row);
    }
  };

  const int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
    if (a.variant != b.variant) return a.variant < b.variant;
    if (a.level != b.level) return a.level < b.level;
    return a.seed < b.seed;
  });
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,level,seed,trans_err_m,rot_err_deg,time_err_s,status\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", r.trans_err, r.rot_err, r.time_err);
    out << r.variant << "," << r.level << "," << r.seed << "," << buf << "," << r.status
        << "\n";
  }
}

}  // namespace stcal
