// stcal: spatiotemporal hand-eye calibration for trajectory alignment.
//
// Subcommands: align, calibrate, refine, evaluate, simulate, ablate, run.
// Stage-specific exit codes: 1 ingest, 2 align, 3 calibrate, 4 refine, 5 evaluate.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stcal/batch_refinement.hpp"
#include "stcal/evaluation.hpp"
#include "stcal/pipeline.hpp"
#include "stcal/result_io.hpp"
#include "stcal/synthetic.hpp"

namespace fs = std::filesystem;
using namespace stcal;

namespace {

constexpr int kExitIngest = 1;
constexpr int kExitAlign = 2;
constexpr int kExitCalibrate = 3;
constexpr int kExitRefine = 4;
constexpr int kExitEvaluate = 5;

constexpr const char* kVersion = "stcal 1.0.0";

struct IoOptions {
  std::string hand_path, eye_path;
  std::string format = "tum";
  std::string hand_format, eye_format;
};

TrajectoryFormat parse_format(const std::string& f) {
  if (f == "tum") return TrajectoryFormat::tum;
  if (f == "euroc") return TrajectoryFormat::euroc_csv;
  throw Error("unknown trajectory format: " + f);
}

Trajectory load_with(const IoOptions& io, bool hand) {
  const std::string path = hand ? io.hand_path : io.eye_path;
  std::string fmt = hand ? io.hand_format : io.eye_format;
  if (fmt.empty()) fmt = io.format;
  return load_trajectory(path, parse_format(fmt), hand ? "G->H" : "W->E");
}

void add_io_options(CLI::App* cmd, IoOptions& io) {
  cmd->add_option("--hand", io.hand_path, "hand (reference) trajectory file")->required();
  cmd->add_option("--eye", io.eye_path, "eye (estimated) trajectory file")->required();
  cmd->add_option("--format", io.format, "trajectory format for both inputs")
      ->check(CLI::IsMember({"tum", "euroc"}));
  cmd->add_option("--hand-format", io.hand_format, "override format for --hand");
  cmd->add_option("--eye-format", io.eye_format, "override format for --eye");
}

struct CalibOptions {
  double eta_deg = 5.0;
  double mu = 5.0;
  double phi_deg = 0.5;
  double psi = 0.02;
  int iters = 200;
  std::uint64_t seed = 0;
  int min_inliers = 10;
  std::string strategy = "rotconstr";
  bool no_robust_kernel = false;
  double pair_rate = 0.0;
};

void add_calib_options(CLI::App* cmd, CalibOptions& c) {
  cmd->add_option("--eta", c.eta_deg, "rotational pair threshold (deg)");
  cmd->add_option("--mu", c.mu, "robust kernel gain");
  cmd->add_option("--phi", c.phi_deg, "inlier rotation threshold (deg)");
  cmd->add_option("--psi", c.psi, "inlier translation threshold (m)");
  cmd->add_option("--iters", c.iters, "RANSAC iterations");
  cmd->add_option("--seed", c.seed, "RANSAC rng seed");
  cmd->add_option("--min-inliers", c.min_inliers, "consensus minimum");
  cmd->add_option("--strategy", c.strategy, "relative pose construction")
      ->check(CLI::IsMember({"rotconstr", "global", "interframe"}));
  cmd->add_flag("--no-robust-kernel", c.no_robust_kernel, "disable the screw-consistency kernel");
  cmd->add_option("--pair-rate", c.pair_rate, "shared grid rate (Hz, 0=min native)");
}

CalibrationConfig to_config(const CalibOptions& c) {
  CalibrationConfig cfg;
  cfg.eta = deg2rad(c.eta_deg);
  cfg.mu = c.mu;
  cfg.phi = deg2rad(c.phi_deg);
  cfg.psi = c.psi;
  cfg.max_iterations = c.iters;
  cfg.rng_seed = c.seed;
  cfg.min_inliers = c.min_inliers;
  cfg.robust_kernel = !c.no_robust_kernel;
  cfg.pair_rate = c.pair_rate;
  if (c.strategy == "global")
    cfg.strategy = PairStrategy::global;
  else if (c.strategy == "interframe")
    cfg.strategy = PairStrategy::interframe;
  else
    cfg.strategy = PairStrategy::rotconstr;
  return cfg;
}

void write_pair_diagnostics(const std::string& path, const CalibrationOutput& out) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open diagnostics file: " + path);
  f << "i,j,t_i,t_j,hand_angle_deg,eye_angle_deg,E,weight,inlier\n";
  char buf[256];
  for (const auto& d : out.diagnostics) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9f,%.9f,%.6f,%.6f,%.9f,%.9g,%d\n", d.i, d.j,
                  d.t_i, d.t_j, rad2deg(d.hand_angle), rad2deg(d.eye_angle), d.consistency_E,
                  d.weight, d.inlier ? 1 : 0);
    f << buf;
  }
}

void write_manifest(const std::string& path, const CLI::App& app, const std::string& command) {
  std::ofstream f(path);
  if (!f) return;
  f << "# run manifest\n";
  f << "version " << kVersion << "\n";
  f << "command " << command << "\n";
  f << app.config_to_str(true, false);
}

int fail(int code, const char* stage, const std::exception& e) {
  std::cerr << "error (" << stage << "): " << e.what() << "\n";
  return code;
}

// ------------------------------------------------------------------ align ---

int cmd_align(const IoOptions& io, const AlignConfig& cfg, bool force) {
  Trajectory hand, eye;
  try {
    hand = load_with(io, true);
    eye = load_with(io, false);
  } catch (const std::exception& e) {
    return fail(kExitIngest, "ingest", e);
  }
  try {
    const TimeOffsetEstimate est = estimate_time_offset(hand, eye, cfg);
    std::printf("dt %.9f\n", est.dt);
    std::printf("peak_correlation %.6f\n", est.peak_correlation);
    std::printf("curvature_ok %d\n", est.curvature_ok ? 1 : 0);
    if (!est.reliable && !force) {
      std::cerr << "error (align): estimate unreliable (peak " << est.peak_correlation
                << "); rerun with --force to accept\n";
      return kExitAlign;
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(kExitAlign, "align", e);
  }
}

// -------------------------------------------------------------- calibrate ---

int run_calibration(const IoOptions& io, const CalibOptions& copt, const AlignConfig& acfg,
                    bool force, const std::string& out_path, const std::string& diag_path,
                    bool have_dt, double dt_override, CalibrationOutput* result_out) {
  Trajectory hand, eye;
  try {
    hand = load_with(io, true);
    eye = load_with(io, false);
  } catch (const std::exception& e) {
    return fail(kExitIngest, "ingest", e);
  }

  CalibrationOutput out;
  try {
    std::optional<double> dt;
    if (have_dt) dt = dt_override;
    out = calibrate_trajectories(hand, eye, to_config(copt), acfg, dt);
  } catch (const InsufficientOverlap& e) {
    return fail(kExitAlign, "align", e);
  } catch (const NoMotion& e) {
    return fail(kExitAlign, "align", e);
  } catch (const std::exception& e) {
    return fail(kExitCalibrate, "calibrate", e);
  }

  if (!out.time_offset.reliable && !have_dt && !force) {
    std::cerr << "error (align): time offset estimate unreliable (peak "
              << out.time_offset.peak_correlation << "); rerun with --force\n";
    return kExitAlign;
  }

  if (!out_path.empty()) save_result(out_path, ResultFile::from_result(out.result));
  if (!diag_path.empty()) write_pair_diagnostics(diag_path, out);
  std::printf("dt %.9f\n", out.result.dt);
  const Quat q = out.result.extrinsic.rotation();
  const Eigen::Vector3d t = out.result.extrinsic.translation();
  std::printf("extrinsic %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", t.x(), t.y(), t.z(), q.x, q.y,
              q.z, q.w);
  std::printf("quality %.6e\n", out.result.quality);
  std::printf("inliers %d / %d\n", out.result.inlier_count, out.result.pair_count);
  if (result_out) *result_out = out;
  return 0;
}

// ----------------------------------------------------------------- refine ---

int run_refine(const IoOptions& io, const CalibrationResult& init, const RefinementConfig& rcfg,
               const std::string& out_path, CalibrationResult* refined_out) {
  Trajectory hand, eye;
  try {
    hand = load_with(io, true);
    eye = load_with(io, false);
  } catch (const std::exception& e) {
    return fail(kExitIngest, "ingest", e);
  }
  try {
    const RefinementProblem problem =
        make_refinement_problem(hand, eye, init.extrinsic, init.dt, rcfg);
    const RefinementResult r = refine(problem);

    CalibrationResult out = init;
    out.extrinsic = r.extrinsic;
    out.dt = r.dt;
    if (!out_path.empty()) {
      ResultFile f = ResultFile::from_result(out);
      f.extra["refined"] = "1";
      save_result(out_path, f);
      std::ofstream rep(out_path + ".report.txt");
      rep << "iterations " << r.report.iterations << "\n";
      rep << "initial_cost " << r.report.initial_cost << "\n";
      rep << "final_cost " << r.report.final_cost << "\n";
      rep << "converged " << (r.report.converged ? 1 : 0) << "\n";
      rep << "termination " << r.report.termination << "\n";
      rep << "numeric_blocks";
      for (const auto& b : r.report.numeric_blocks) rep << " " << b;
      rep << "\n";
      rep << "dropped_eye_pairs " << r.report.dropped_eye_pairs << "\n";
      rep << "dt_hit_trust_region " << (r.report.dt_hit_trust_region ? 1 : 0) << "\n";
    }
    std::printf("dt %.9f\n", out.dt);
    const Quat q = out.extrinsic.rotation();
    const Eigen::Vector3d t = out.extrinsic.translation();
    std::printf("extrinsic %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", t.x(), t.y(), t.z(), q.x,
                q.y, q.z, q.w);
    std::printf("iterations %d\n", r.report.iterations);
    std::printf("cost %.6e -> %.6e (%s)\n", r.report.initial_cost, r.report.final_cost,
                r.report.termination.c_str());
    if (refined_out) *refined_out = out;
    if (r.report.diverged) {
      std::cerr << "error (refine): optimizer made no progress; initial values returned\n";
      return kExitRefine;
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(kExitRefine, "refine", e);
  }
}

// --------------------------------------------------------------- evaluate ---

int run_evaluate(const std::string& est_path, const std::string& est_format,
                 const std::string& gt_path, const std::string& gt_format,
                 const CalibrationResult& calib, bool with_scale, double max_dt_ms,
                 bool no_umeyama, const std::string& csv_path) {
  Trajectory est, gt;
  try {
    est = load_trajectory(est_path, parse_format(est_format), "W->E");
    gt = load_trajectory(gt_path, parse_format(gt_format), "G->H");
  } catch (const std::exception& e) {
    return fail(kExitIngest, "ingest", e);
  }
  try {
    const EvaluationOutcome out = evaluate_against_ground_truth(
        est, gt, calib, with_scale, max_dt_ms * 1e-3, !no_umeyama);
    std::printf("matched %d\n", out.metrics.matched_count);
    std::printf("ape_rmse_m %.9f\n", out.metrics.ape_rmse);
    std::printf("are_rmse_deg %.9f\n", out.metrics.are_rmse);
    if (!csv_path.empty()) {
      std::ofstream f(csv_path);
      if (!f) throw Error("cannot open csv: " + csv_path);
      f << "t,pos_err_m,rot_err_deg\n";
      char buf[128];
      for (std::size_t i = 0; i < out.metrics.per_sample_pos_err.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9f,%.9g,%.9g\n", out.metrics.matched_times[i],
                      out.metrics.per_sample_pos_err[i], out.metrics.per_sample_rot_err[i]);
        f << buf;
      }
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(kExitEvaluate, "evaluate", e);
  }
}

// --------------------------------------------------------------- simulate ---

int run_simulate(const std::string& preset, int level, std::uint64_t seed, double span,
                 double dt, const std::vector<double>& extrinsic7, bool randomize,
                 double hand_rate, double eye_rate, const std::string& out_dir) {
  try {
    SimConfig cfg;
    if (preset == "figure8")
      cfg.preset = MotionPreset::figure8;
    else if (preset == "random_walk")
      cfg.preset = MotionPreset::random_walk;
    else if (preset == "spin_rich")
      cfg.preset = MotionPreset::spin_rich;
    else
      throw Error("unknown preset: " + preset);
    cfg.level = level;
    cfg.seed = seed;
    cfg.span = span;
    cfg.hand_rate = hand_rate;
    cfg.eye_rate = eye_rate;
    cfg.randomize_xdt = randomize;
    if (!randomize) {
      cfg.dt = dt;
      if (extrinsic7.size() == 7) {
        cfg.extrinsic = DualQuat::from_rt(
            Quat(extrinsic7[6], extrinsic7[3], extrinsic7[4], extrinsic7[5]).normalized(),
            Eigen::Vector3d(extrinsic7[0], extrinsic7[1], extrinsic7[2]));
      } else {
        cfg.extrinsic = DualQuat::from_rt(
            Quat::from_axis_angle(Eigen::Vector3d(1, 2, 3), deg2rad(30.0)),
            Eigen::Vector3d(0.08, -0.05, 0.03));
      }
    }
    const GroundTruthBundle b = simulate(cfg);
    fs::create_directories(out_dir);
    save_tum(out_dir + "/hand.txt", b.hand);
    save_tum(out_dir + "/eye.txt", b.eye_noisy);
    CalibrationResult truth;
    truth.extrinsic = b.extrinsic_gt;
    truth.dt = b.dt_gt;
    ResultFile tf = ResultFile::from_result(truth);
    tf.extra["level"] = std::to_string(level);
    tf.extra["seed"] = std::to_string(seed);
    tf.extra["preset"] = preset;
    tf.extra["drift_model"] = "right-composed local random walk, gaussian magnitudes";
    save_result(out_dir + "/truth.txt", tf);
    std::printf("wrote %s/{hand.txt,eye.txt,truth.txt}\n", out_dir.c_str());
    return 0;
  } catch (const std::exception& e) {
    return fail(kExitIngest, "simulate", e);
  }
}

// ----------------------------------------------------------------- ablate ---

std::vector<int> parse_levels(const std::string& spec) {
  std::vector<int> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto dash = tok.find('-');
    if (dash != std::string::npos && dash > 0) {
      const int lo = std::stoi(tok.substr(0, dash));
      const int hi = std::stoi(tok.substr(dash + 1));
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(std::stoi(tok));
    }
  }
  return out;
}

int run_ablate(const std::string& variants_csv, const std::string& levels_spec, int seeds,
               std::uint64_t seed_base, int jobs, double span, int iters,
               const std::string& out_csv) {
  try {
    AblationSpec spec;
    std::stringstream ss(variants_csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
      AblationVariant v;
      v.name = name;
      if (name == "rotconstr") {
      } else if (name == "rotconstr_nokernel") {
        v.robust_kernel = false;
      } else if (name == "global") {
        v.strategy = PairStrategy::global;
        v.robust_kernel = false;
      } else if (name == "interframe") {
        v.strategy = PairStrategy::interframe;
        v.robust_kernel = false;
      } else if (name == "eta2") {
        v.eta = deg2rad(2.0);
      } else if (name == "eta10") {
        v.eta = deg2rad(10.0);
      } else {
        throw Error("unknown ablation variant: " + name);
      }
      spec.variants.push_back(v);
    }
    spec.levels = parse_levels(levels_spec);
    for (int s = 0; s < seeds; ++s) spec.seeds.push_back(seed_base + s);
    spec.sim.span = span;
    spec.jobs = jobs;
    spec.ransac_iterations = iters;
    const auto rows = run_ablation(spec);
    std::ofstream f(out_csv);
    if (!f) throw Error("cannot open csv: " + out_csv);
    write_ablation_csv(f, rows);
    int failures = 0;
    for (const auto& r : rows) failures += (r.status != "ok");
    std::printf("%zu runs, %d failures -> %s\n", rows.size(), failures, out_csv.c_str());
    return 0;
  } catch (const std::exception& e) {
    return fail(kExitCalibrate, "ablate", e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatiotemporal hand-eye calibration for VO/VIO trajectory evaluation"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "key=value config file; flags override");
  app.require_subcommand(1);

  // align
  IoOptions align_io;
  AlignConfig align_cfg;
  bool align_force = false;
  auto* align_cmd = app.add_subcommand("align", "estimate the clock offset dt");
  add_io_options(align_cmd, align_io);
  align_cmd->add_option("--rate", align_cfg.correlation_rate, "correlation rate (Hz, 0=min native)");
  align_cmd->add_option("--min-overlap", align_cfg.min_overlap, "minimum overlap (s)");
  align_cmd->add_flag("--force", align_force, "accept unreliable estimates");

  // calibrate
  IoOptions cal_io;
  CalibOptions cal_opt;
  AlignConfig cal_align;
  bool cal_force = false;
  std::string cal_out = "result.txt", cal_diag;
  double cal_dt = 0.0;
  auto* cal_cmd = app.add_subcommand("calibrate", "linear spatiotemporal calibration (LC)");
  add_io_options(cal_cmd, cal_io);
  add_calib_options(cal_cmd, cal_opt);
  cal_cmd->add_option("--rate", cal_align.correlation_rate, "correlation rate (Hz)");
  cal_cmd->add_option("--min-overlap", cal_align.min_overlap, "minimum overlap (s)");
  cal_cmd->add_flag("--force", cal_force, "accept unreliable time estimates");
  cal_cmd->add_option("--out", cal_out, "result file");
  cal_cmd->add_option("--diagnostics", cal_diag, "per-pair diagnostics CSV");
  auto* cal_dt_opt = cal_cmd->add_option("--dt", cal_dt, "skip alignment, use this offset (s)");

  // refine
  IoOptions ref_io;
  std::string ref_init, ref_out = "result_refined.txt";
  RefinementConfig ref_cfg;
  auto* ref_cmd = app.add_subcommand("refine", "continuous-time batch refinement (BE)");
  add_io_options(ref_cmd, ref_io);
  ref_cmd->add_option("--init", ref_init, "initial result file from calibrate")->required();
  ref_cmd->add_option("--knot-spacing", ref_cfg.knot_spacing, "spline knot spacing (s)");
  ref_cmd->add_option("--order", ref_cfg.order, "spline order");
  ref_cmd->add_option("--max-iterations", ref_cfg.max_iterations, "LM iteration cap");
  ref_cmd->add_option("--out", ref_out, "refined result file");

  // evaluate
  std::string ev_est, ev_gt, ev_calib, ev_csv;
  std::string ev_est_format = "tum", ev_gt_format = "tum";
  bool ev_scale = false, ev_no_umeyama = false;
  double ev_max_dt_ms = 10.0;
  auto* ev_cmd = app.add_subcommand("evaluate", "APE/ARE against calibrated ground truth");
  ev_cmd->add_option("--est", ev_est, "estimated trajectory")->required();
  ev_cmd->add_option("--gt-raw", ev_gt, "raw ground-truth (hand) trajectory")->required();
  ev_cmd->add_option("--calib", ev_calib, "calibration result file")->required();
  ev_cmd->add_option("--est-format", ev_est_format, "estimate format");
  ev_cmd->add_option("--gt-format", ev_gt_format, "ground-truth format");
  ev_cmd->add_flag("--with-scale", ev_scale, "similarity (Sim3) alignment");
  ev_cmd->add_flag("--no-umeyama", ev_no_umeyama, "skip the global Umeyama alignment");
  ev_cmd->add_option("--max-dt", ev_max_dt_ms, "association window (ms)");
  ev_cmd->add_option("--out-csv", ev_csv, "per-sample error CSV");

  // simulate
  std::string sim_preset = "figure8", sim_out = "sim";
  int sim_level = 0;
  std::uint64_t sim_seed = 1;
  double sim_span = 36.0, sim_dt = 0.25, sim_hand_rate = 100.0, sim_eye_rate = 20.0;
  std::vector<double> sim_x;
  bool sim_random = false;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic hand/eye bundle");
  sim_cmd->add_option("--preset", sim_preset, "figure8|random_walk|spin_rich");
  sim_cmd->add_option("--level", sim_level, "noise level 0-10");
  sim_cmd->add_option("--seed", sim_seed, "generator seed");
  sim_cmd->add_option("--span", sim_span, "model span (s)");
  sim_cmd->add_option("--dt", sim_dt, "ground-truth clock offset (s)");
  sim_cmd->add_option("--extrinsic", sim_x, "tx ty tz qx qy qz qw")->expected(7);
  sim_cmd->add_flag("--random-xdt", sim_random, "draw extrinsic and dt from the seed");
  sim_cmd->add_option("--hand-rate", sim_hand_rate, "hand rate (Hz)");
  sim_cmd->add_option("--eye-rate", sim_eye_rate, "eye rate (Hz)");
  sim_cmd->add_option("--out", sim_out, "output directory")->required();

  // ablate
  std::string ab_variants = "rotconstr,rotconstr_nokernel,global,interframe,eta2,eta10";
  std::string ab_levels = "0-10", ab_out = "ablation.csv";
  int ab_seeds = 20, ab_jobs = 1, ab_iters = 200;
  std::uint64_t ab_seed_base = 100;
  double ab_span = 36.0;
  auto* ab_cmd = app.add_subcommand("ablate", "strategy/level/seed grid -> CSV");
  ab_cmd->add_option("--variants", ab_variants, "comma list");
  ab_cmd->add_option("--levels", ab_levels, "e.g. 0-10 or 0,5,10");
  ab_cmd->add_option("--seeds", ab_seeds, "seeds per cell");
  ab_cmd->add_option("--seed-base", ab_seed_base, "first seed");
  ab_cmd->add_option("--jobs", ab_jobs, "parallel runs");
  ab_cmd->add_option("--span", ab_span, "trajectory span (s)");
  ab_cmd->add_option("--iters", ab_iters, "RANSAC iterations per run");
  ab_cmd->add_option("--out", ab_out, "output CSV")->required();

  // run (align -> calibrate -> refine -> evaluate)
  IoOptions run_io;
  CalibOptions run_copt;
  AlignConfig run_align;
  std::string run_out = "out";
  bool run_force = false, run_skip_refine = false, run_scale = false;
  RefinementConfig run_rcfg;
  auto* run_cmd = app.add_subcommand("run", "full pipeline with a run manifest");
  add_io_options(run_cmd, run_io);
  add_calib_options(run_cmd, run_copt);
  run_cmd->add_option("--rate", run_align.correlation_rate, "correlation rate (Hz)");
  run_cmd->add_option("--min-overlap", run_align.min_overlap, "minimum overlap (s)");
  run_cmd->add_flag("--force", run_force, "accept unreliable time estimates");
  run_cmd->add_flag("--skip-refine", run_skip_refine, "stop after the linear stage");
  run_cmd->add_flag("--with-scale", run_scale, "Sim3 alignment in evaluation");
  run_cmd->add_option("--knot-spacing", run_rcfg.knot_spacing, "spline knot spacing (s)");
  run_cmd->add_option("--order", run_rcfg.order, "spline order");
  run_cmd->add_option("--out", run_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (align_cmd->parsed()) return cmd_align(align_io, align_cfg, align_force);

  if (cal_cmd->parsed())
    return run_calibration(cal_io, cal_opt, cal_align, cal_force, cal_out, cal_diag,
                           cal_dt_opt->count() > 0, cal_dt, nullptr);

  if (ref_cmd->parsed()) {
    CalibrationResult init;
    try {
      init = load_result(ref_init).to_result();
    } catch (const std::exception& e) {
      return fail(kExitIngest, "ingest", e);
    }
    return run_refine(ref_io, init, ref_cfg, ref_out, nullptr);
  }

  if (ev_cmd->parsed()) {
    CalibrationResult calib;
    try {
      calib = load_result(ev_calib).to_result();
    } catch (const std::exception& e) {
      return fail(kExitIngest, "ingest", e);
    }
    return run_evaluate(ev_est, ev_est_format, ev_gt, ev_gt_format, calib, ev_scale,
                        ev_max_dt_ms, ev_no_umeyama, ev_csv);
  }

  if (sim_cmd->parsed())
    return run_simulate(sim_preset, sim_level, sim_seed, sim_span, sim_dt, sim_x, sim_random,
                        sim_hand_rate, sim_eye_rate, sim_out);

  if (ab_cmd->parsed())
    return run_ablate(ab_variants, ab_levels, ab_seeds, ab_seed_base, ab_jobs, ab_span,
                      ab_iters, ab_out);

  if (run_cmd->parsed()) {
    fs::create_directories(run_out);
    write_manifest(run_out + "/manifest.txt", app, "run");
    CalibrationOutput lc;
    const int rc = run_calibration(run_io, run_copt, run_align, run_force,
                                   run_out + "/result_lc.txt", run_out + "/pairs.csv", false,
                                   0.0, &lc);
    if (rc != 0) return rc;
    CalibrationResult final_result = lc.result;
    if (!run_skip_refine) {
      CalibrationResult refined;
      const int rr =
          run_refine(run_io, lc.result, run_rcfg, run_out + "/result_be.txt", &refined);
      if (rr != 0) return rr;
      final_result = refined;
    }
    // evaluation: the eye input is the estimate, the hand input the raw ground truth
    std::string eye_fmt = run_io.eye_format.empty() ? run_io.format : run_io.eye_format;
    std::string hand_fmt = run_io.hand_format.empty() ? run_io.format : run_io.hand_format;
    return run_evaluate(run_io.eye_path, eye_fmt, run_io.hand_path, hand_fmt, final_result,
                        run_scale, 10.0, false, run_out + "/per_sample_errors.csv");
  }

  return 0;
}
