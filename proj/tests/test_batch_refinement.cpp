#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stcal/batch_refinement.hpp"
#include "stcal/pipeline.hpp"
#include "stcal/synthetic.hpp"
#include "support/oracles.hpp"

using namespace stcal;

namespace {

PoseRT random_pose(Rng& rng) {
  return {Quat::from_axis_angle(rng.unit_vector(), rng.uniform(0.05, 2.8)),
          Eigen::Vector3d(rng.gauss(), rng.gauss(), rng.gauss())};
}

SimConfig short_sim(std::uint64_t seed, int level = 0, double dt = 0.25) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.level = level;
  cfg.randomize_xdt = false;
  cfg.dt = dt;
  cfg.span = 22.0;  // 17 s of eye data after the stamp guard
  return cfg;
}

}  // namespace

TEST_CASE("relative residual") {
  Rng rng(201);

  SUBCASE("zero when model equals observation") {
    const PoseRT a = random_pose(rng), b = random_pose(rng);
    CHECK(relative_residual(a, b, a, b).norm() < 1e-15);
  }

  SUBCASE("invariant to a shared left transform on the observations") {
    for (int k = 0; k < 50; ++k) {
      const PoseRT a = random_pose(rng), b = random_pose(rng);
      const PoseRT oa = random_pose(rng), ob = random_pose(rng);
      const PoseRT f = random_pose(rng);
      const auto r0 = relative_residual(a, b, oa, ob);
      const auto r1 = relative_residual(a, b, compose(f, oa), compose(f, ob));
      CHECK((r0 - r1).norm() < 1e-12);
    }
  }

  SUBCASE("epsilon rotation of one observation shows up at first order") {
    const PoseRT a = random_pose(rng), b = random_pose(rng);
    for (double eps : {1e-3, 1e-4, 1e-5}) {
      PoseRT ob = b;
      ob.rotation = (b.rotation * Quat::from_axis_angle(rng.unit_vector(), eps)).normalized();
      const auto r = relative_residual(a, b, a, ob);
      CHECK(std::abs(r.head<3>().norm() - eps) < 10 * eps * eps);
    }
  }
}

TEST_CASE("analytic residual Jacobians match central differences on 100 random states") {
  Rng rng(203);
  const double h = 1e-7;
  int states = 0;
  for (int k = 0; k < 100; ++k) {
    PoseRT ta = random_pose(rng), tb = random_pose(rng);
    const PoseRT oa = random_pose(rng), ob = random_pose(rng);
    Eigen::Matrix<double, 6, 6> Ja, Jb;
    relative_residual_jacobians(ta, tb, oa, ob, Ja, Jb);

    auto check_block = [&](PoseRT& target, const Eigen::Matrix<double, 6, 6>& J) {
      for (int d = 0; d < 6; ++d) {
        Eigen::Vector3d delta = Eigen::Vector3d::Zero();
        delta[d % 3] = h;
        const PoseRT saved = target;
        auto apply = [&](double sign) {
          if (d < 3)
            target.rotation = (saved.rotation * Quat::exp_map(sign * delta)).normalized();
          else
            target.translation = saved.translation + sign * delta;
        };
        apply(+1);
        const auto rp = relative_residual(ta, tb, oa, ob);
        target = saved;
        apply(-1);
        const auto rm = relative_residual(ta, tb, oa, ob);
        target = saved;
        const Eigen::Matrix<double, 6, 1> fd = (rp - rm) / (2 * h);
        const Eigen::Matrix<double, 6, 1> an = J.col(d);
        const double scale = std::max(1.0, an.norm());
        CHECK((fd - an).norm() / scale < 1e-5);
      }
    };
    check_block(ta, Ja);
    check_block(tb, Jb);
    ++states;
  }
  CHECK(states == 100);
}

TEST_CASE("total cost") {
  const GroundTruthBundle b = simulate(short_sim(7));

  RefinementConfig cfg;
  const RefinementProblem problem =
      make_refinement_problem(b.hand, b.eye_clean, b.extrinsic_gt, b.dt_gt, cfg);

  SUBCASE("zero at the generator state") {
    // the spline is re-fit to the hand observations; noise-free residuals stay tiny
    CHECK(total_cost(problem) < 1e-8);
  }

  SUBCASE("dt perturbation strictly increases the cost") {
    const double c0 = total_cost(problem);
    RefinementProblem p2 = problem;
    p2.dt += 0.025;  // half an eye period
    const double c1 = total_cost(p2);
    CHECK(c1 > c0);
    // direct sweep: the minimum sits at the true dt
    double best_dt = 0, best_c = 1e300;
    for (double ddt = -0.02; ddt <= 0.0201; ddt += 0.005) {
      RefinementProblem p = problem;
      p.dt += ddt;
      const double c = total_cost(p);
      if (c < best_c) {
        best_c = c;
        best_dt = ddt;
      }
    }
    CHECK(std::abs(best_dt) < 1e-9);
  }

  SUBCASE("doubling the eye covariance halves the eye contribution") {
    // hand term is ~0 here, so the total is the eye term; perturb the extrinsic a bit
    // (below the Huber knees) to create eye residuals
    RefinementProblem p = problem;
    p.extrinsic = DualQuat::from_rt(
        (p.extrinsic.rotation() *
         Quat::from_axis_angle(Eigen::Vector3d::UnitX(), deg2rad(0.05)))
            .normalized(),
        p.extrinsic.translation() + Eigen::Vector3d(0.002, 0, 0));
    const double c1 = total_cost(p);
    RefinementProblem p2 = p;
    p2.cfg.sigma_rot_eye *= std::sqrt(2.0);
    p2.cfg.sigma_trans_eye *= std::sqrt(2.0);
    const double c2 = total_cost(p2);
    CHECK(c2 == doctest::Approx(0.5 * c1).epsilon(1e-6));
  }

  SUBCASE("invariant to one rigid transform on every eye observation") {
    Rng rng(207);
    const DualQuat f = oracle::random_transform(rng);
    std::vector<PoseSample> moved;
    for (std::size_t i = 0; i < b.eye_clean.size(); ++i)
      moved.push_back({b.eye_clean[i].t, f * b.eye_clean[i].pose});
    RefinementProblem p = problem;
    p.extrinsic = DualQuat::from_rt(p.extrinsic.rotation(),
                                    p.extrinsic.translation() + Eigen::Vector3d(0.003, 0, 0));
    const double c_before = total_cost(p);
    p.eye_obs = Trajectory(std::move(moved), "", b.eye_clean.epoch());
    const double c_after = total_cost(p);
    CHECK(c_after == doctest::Approx(c_before).epsilon(1e-9));
  }
}

TEST_CASE("refine") {
  const GroundTruthBundle b = simulate(short_sim(8));

  SUBCASE("starting at the truth takes at most one iteration") {
    // start exactly at the minimum: the generator's own spline, not a refit
    RefinementProblem problem{b.hand, b.eye_clean,
                              build_motion_model(MotionPreset::figure8, 22.0, 8),
                              b.extrinsic_gt, b.dt_gt, RefinementConfig{}};
    const RefinementResult r = refine(problem);
    CHECK(r.report.iterations <= 1);
    const auto [terr, rerr] = extrinsic_error(r.extrinsic, b.extrinsic_gt);
    CHECK(terr < 1e-10);
    CHECK(rerr < 1e-10);
    CHECK(std::abs(r.dt - b.dt_gt) < 1e-10);
    CHECK_FALSE(r.report.diverged);
  }

  SUBCASE("perturbed init recovers the truth on noise-free data") {
    Rng rng(211);
    const DualQuat perturbed_x = DualQuat::from_rt(
        (b.extrinsic_gt.rotation() *
         Quat::from_axis_angle(rng.unit_vector(), deg2rad(0.2)))
            .normalized(),
        b.extrinsic_gt.translation() + Eigen::Vector3d(0.002, -0.001, 0.0005));
    const double perturbed_dt = b.dt_gt + 0.003;
    const RefinementProblem problem =
        make_refinement_problem(b.hand, b.eye_clean, perturbed_x, perturbed_dt, {});
    const RefinementResult r = refine(problem);
    const auto [terr, rerr] = extrinsic_error(r.extrinsic, b.extrinsic_gt);
    CAPTURE(r.report.iterations);
    CAPTURE(r.report.final_cost);
    CHECK(terr < 1e-6);
    CHECK(rerr < 1e-6);
    CHECK(std::abs(r.dt - b.dt_gt) < 1e-5);  // 0.01 ms
    CHECK(r.report.final_cost <= r.report.initial_cost);
    CHECK_FALSE(r.report.diverged);
    REQUIRE(r.report.numeric_blocks.size() == 2);
    CHECK(r.report.numeric_blocks[0] == "rot_vertices");
    CHECK(r.report.numeric_blocks[1] == "dt");
  }

  SUBCASE("noisy data: cost never increases over the initialization") {
    const GroundTruthBundle noisy = simulate(short_sim(9, 5));
    const CalibrationOutput lc = calibrate_trajectories(noisy.hand, noisy.eye_noisy);
    const RefinementProblem problem = make_refinement_problem(
        noisy.hand, noisy.eye_noisy, lc.result.extrinsic, lc.result.dt, {});
    const double c0 = total_cost(problem);
    const RefinementResult r = refine(problem);
    CHECK(r.report.initial_cost == doctest::Approx(c0).epsilon(1e-12));
    CHECK(r.report.final_cost <= r.report.initial_cost);
    CHECK(r.report.final_cost < c0);  // and it actually improves on level-5 noise
  }

  SUBCASE("dt error inside the trust region is recovered") {
    // init dt off by 20 ms; the trust region is +/-25 ms around the init
    const RefinementProblem problem =
        make_refinement_problem(b.hand, b.eye_clean, b.extrinsic_gt, b.dt_gt + 0.020, {});
    const RefinementResult r = refine(problem);
    CHECK(std::abs(r.dt - b.dt_gt) < 1e-5);
  }
}
