#include "stcal/synthetic.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "stcal/errors.hpp"
#include "stcal/rng.hpp"

namespace stcal {

NoiseLevels NoiseLevels::from_level(int level, std::uint64_t seed) {
  if (level < 0 || level > 10) throw Error("noise level must be in [0, 10]");
  NoiseLevels n;
  n.level = level;
  n.trans_sigma = level * 0.05e-3;
  n.rot_sigma = deg2rad(level * 0.002);
  n.rng_seed = seed;
  return n;
}

SplinePose build_motion_model(MotionPreset preset, double span_s, std::uint64_t seed) {
  if (span_s < 10.0) throw SpanTooShort("motion model span must be >= 10 s");
  const int order = 4;
  const double spacing = 0.1;
  const double first_knot = -(order - 1) * spacing;  // domain starts at t = 0
  const int vcount = static_cast<int>(std::ceil((span_s - first_knot) / spacing)) + 1;

  Rng rng = Rng::derive(seed, 0xC0FFEE);
  std::vector<Quat> rot_v(vcount);
  std::vector<Eigen::Vector3d> trans_v(vcount);

  // small per-seed detuning keeps the signal aperiodic across seeds
  const double f1 = 0.23 + 0.02 * rng.uniform();
  const double f2 = f1 * 1.4142135623730951;
  const double f3 = 0.31 + 0.03 * rng.uniform();
  const double f4 = f3 * 1.7320508075688772;
  const double ph1 = rng.uniform(0.0, 2.0 * kPi);
  const double ph2 = rng.uniform(0.0, 2.0 * kPi);

  for (int k = 0; k < vcount; ++k) {
    const double u = first_knot + k * spacing;
    const double mod = 1.0 + 0.25 * std::sin(2.0 * kPi * 0.037 * u + ph2);
    switch (preset) {
      case MotionPreset::figure8: {
        trans_v[k] = {0.8 * std::sin(2.0 * kPi * f1 * u + ph1),
                      0.5 * std::sin(4.0 * kPi * f1 * u + ph1),
                      0.3 * std::sin(2.0 * kPi * f2 * u + ph2)};
        // hand-held profile: one slow dominant swing (the orientation keeps returning
        // near its start, as in room-scale sequences) plus small fast wobble that
        // carries the angular-speed signal; the swing is chirped so the speed signal
        // never repeats and the correlation peak stays unambiguous
        const double slow = std::sin(2.0 * kPi * (0.085 * u + 0.0007 * u * u) + ph1);
        const Eigen::Vector3d phi =
            0.55 * slow * Eigen::Vector3d(0.2, 0.4, 0.89).normalized() +
            0.14 * mod * std::sin(2.0 * kPi * f3 * u + ph2) * Eigen::Vector3d::UnitX() +
            0.11 * std::sin(2.0 * kPi * f4 * u + 1.1) * Eigen::Vector3d::UnitY();
        rot_v[k] = Quat::exp_map(phi);
        break;
      }
      case MotionPreset::random_walk: {
        if (k == 0) {
          rot_v[k] = Quat::identity();
          trans_v[k] = Eigen::Vector3d::Zero();
        } else {
          const Eigen::Vector3d dphi = rng.unit_vector() * rng.uniform(0.0, 0.12);
          rot_v[k] = (rot_v[k - 1] * Quat::exp_map(dphi)).normalized();
          trans_v[k] =
              trans_v[k - 1] + Eigen::Vector3d(rng.gauss(), rng.gauss(), rng.gauss()) * 0.02;
        }
        break;
      }
      case MotionPreset::spin_rich: {
        trans_v[k] = {0.4 * std::sin(2.0 * kPi * f1 * u), 0.4 * std::cos(2.0 * kPi * f1 * u),
                      0.1 * std::sin(2.0 * kPi * f3 * u)};
        const Eigen::Vector3d phi(1.0 * std::sin(2.0 * kPi * f3 * u),
                                  1.0 * std::sin(2.0 * kPi * f4 * u + 0.9),
                                  0.8 * std::sin(2.0 * kPi * f1 * u + 2.0));
        rot_v[k] = Quat::exp_map(phi);
        break;
      }
    }
  }

  SplinePose model(order, first_knot, spacing, std::move(rot_v), std::move(trans_v));
  if (rotation_axis_spread(model) < 1e-4)
    throw InsufficientRotation("motion model spins about a single axis");
  return model;
}

SplinePose build_motion_model(const Trajectory& seed_traj, int order, double knot_spacing) {
  if (seed_traj.duration() < 10.0) throw SpanTooShort("seed trajectory span must be >= 10 s");
  SplineFit fit = fit_spline(seed_traj, order, knot_spacing);
  if (rotation_axis_spread(fit.spline) < 1e-4)
    throw InsufficientRotation("seed trajectory spins about a single axis");
  return std::move(fit.spline);
}

double rotation_axis_spread(const SplinePose& model) {
  // scatter matrix of relative-rotation axes over coarse windows
  const double t0 = model.domain_start();
  const double t1 = model.domain_end();
  const double step = 0.25;
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  int count = 0;
  for (double t = t0; t + step < t1; t += step) {
    const Quat a = model.eval_rotation(t);
    const Quat b = model.eval_rotation(t + step);
    const Eigen::Vector3d phi = (a.conjugate() * b).log_map();
    const double angle = phi.norm();
    if (angle < 1e-8) continue;
    const Eigen::Vector3d axis = phi / angle;
    scatter += axis * axis.transpose();
    ++count;
  }
  if (count < 4) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  return eig.eigenvalues()(1) / std::max(eig.eigenvalues()(2), 1e-300);
}

GroundTruthBundle sample_hand_eye(const SplinePose& model, const DualQuat& extrinsic, double dt,
                                  double hand_rate, double eye_rate, const NoiseLevels& noise,
                                  double stamp_guard) {
  const double a = model.domain_start();
  const double b = model.domain_end();
  if (std::abs(dt) > stamp_guard)
    throw OutOfDomain("clock offset exceeds the stamp guard of the generator");
  if (b - a <= 2.0 * stamp_guard + 1.0)
    throw OutOfDomain("model span too short for the requested sampling");

  // Distinct global frame for the eye (W vs G); tests must not assume they coincide.
  const DualQuat global_offset =
      DualQuat::from_rt(Quat::from_axis_angle(Eigen::Vector3d(0.2, 1.0, -0.3), deg2rad(25.0)),
                        Eigen::Vector3d(1.5, -0.7, 0.3));

  GroundTruthBundle out;
  out.extrinsic_gt = extrinsic;
  out.dt_gt = dt;

  std::vector<PoseSample> hand;
  const std::size_t hand_count =
      static_cast<std::size_t>(std::floor((b - a) * hand_rate - 1e-6)) + 1;
  hand.reserve(hand_count);
  for (std::size_t k = 0; k < hand_count; ++k) {
    const double t = a + static_cast<double>(k) / hand_rate;
    hand.push_back({t, to_dual_quat(model.eval(t))});
  }
  out.hand = Trajectory(std::move(hand), "G->H", 0.0);

  // Eye stamps are inset by the fixed guard on both sides regardless of the actual dt,
  // so the stamps do not leak the offset and the correlation lag stays non-trivial.
  std::vector<PoseSample> eye;
  const double e0 = a + stamp_guard;
  const double e1 = b - stamp_guard;
  const std::size_t eye_count =
      static_cast<std::size_t>(std::floor((e1 - e0) * eye_rate - 1e-6)) + 1;
  eye.reserve(eye_count);
  for (std::size_t k = 0; k < eye_count; ++k) {
    const double t = e0 + static_cast<double>(k) / eye_rate;
    eye.push_back({t - e0, (global_offset * to_dual_quat(model.eval(t + dt))) * extrinsic});
  }
  if (eye.size() < 2) throw OutOfDomain("eye sampling window is empty");
  out.eye_clean = Trajectory(std::move(eye), "W->E", e0);

  out.eye_noisy = inject_drift(out.eye_clean, noise);
  return out;
}

// White per-pose measurement jitter rides on top of the accumulated walk; VIO frames
// carry both. The base factor keeps the jitter small against the accumulated drift while
// still dominating the error of near-zero-motion relative pairs.
constexpr double kJitterFactor = 2.0;

Trajectory inject_drift(const Trajectory& traj, const NoiseLevels& noise) {
  if (noise.level == 0 || (noise.trans_sigma == 0.0 && noise.rot_sigma == 0.0)) return traj;
  Rng rng = Rng::derive(noise.rng_seed, 0xD81F7);
  DualQuat drift;  // identity
  std::vector<PoseSample> out;
  out.reserve(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Eigen::Vector3d dtrans(rng.gauss() * noise.trans_sigma,
                                 rng.gauss() * noise.trans_sigma,
                                 rng.gauss() * noise.trans_sigma);
    const Eigen::Vector3d axis = rng.unit_vector();
    const double dangle = rng.gauss() * noise.rot_sigma;
    const DualQuat step = DualQuat::from_rt(Quat::from_axis_angle(axis, dangle), dtrans);
    drift = drift * step;  // local-frame accumulation, the odometry drift model

    // tracking quality fluctuates: a rare heavy tail (5% of frames at 10x) models the
    // frames where the front end struggles; these stay inside the phi/psi gates and are
    // the robust kernel's job
    const double scale = (rng.uniform() < 0.05 ? 10.0 : 1.0) * kJitterFactor;
    const Eigen::Vector3d jt =
        scale * noise.trans_sigma * Eigen::Vector3d(rng.gauss(), rng.gauss(), rng.gauss());
    const double ja = scale * noise.rot_sigma * rng.gauss();
    const DualQuat jitter = DualQuat::from_rt(Quat::from_axis_angle(rng.unit_vector(), ja), jt);
    out.push_back({traj[k].t, traj[k].pose * drift * jitter});
  }
  return Trajectory(std::move(out), traj.frame_label(), traj.epoch());
}

GroundTruthBundle simulate(const SimConfig& cfg) {
  const SplinePose model = build_motion_model(cfg.preset, cfg.span, cfg.seed);
  DualQuat x = cfg.extrinsic;
  double dt = cfg.dt;
  if (cfg.randomize_xdt) {
    Rng rng = Rng::derive(cfg.seed, 0xAB1DE);
    x = DualQuat::from_rt(Quat::from_axis_angle(rng.unit_vector(), rng.uniform(0.2, 1.2)),
                          Eigen::Vector3d(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
                                          rng.uniform(-0.15, 0.15)));
    dt = rng.uniform(-2.0, 2.0);
  }
  return sample_hand_eye(model, x, dt, cfg.hand_rate, cfg.eye_rate,
                         NoiseLevels::from_level(cfg.level, cfg.seed), 2.5);
}

}  // namespace stcal
