#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "stcal/trajectory.hpp"
#include "support/oracles.hpp"

using namespace stcal;

namespace {

Trajectory from_poses(std::vector<std::pair<double, DualQuat>> samples, double epoch = 0.0) {
  std::vector<PoseSample> s;
  for (auto& [t, p] : samples) s.push_back({t, p});
  return Trajectory(std::move(s), "", epoch);
}

}  // namespace

TEST_CASE("TUM parsing") {
  SUBCASE("identity line") {
    std::istringstream in("# comment\n0.0 0 0 0 0 0 0 1\n");
    const Trajectory t = parse_trajectory(in, TrajectoryFormat::tum);
    REQUIRE(t.size() == 1);
    CHECK(t.abs_time(0) == 0.0);
    CHECK(rotation_angle(t[0].pose) == 0.0);
    CHECK(translation_norm(t[0].pose) == 0.0);
  }

  SUBCASE("quaternion order is x y z w on disk") {
    std::istringstream in("1.5 1 2 3 0 0 0.7071067811865476 0.7071067811865476\n");
    const Trajectory t = parse_trajectory(in, TrajectoryFormat::tum);
    CHECK(t[0].pose.rotation().w == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(t[0].pose.rotation().z == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(t[0].pose.translation().isApprox(Eigen::Vector3d(1, 2, 3), 1e-15));
  }

  SUBCASE("7 fields is a parse error") {
    std::istringstream in("0.0 0 0 0 0 0 1\n");
    CHECK_THROWS_AS(parse_trajectory(in, TrajectoryFormat::tum), ParseError);
  }

  SUBCASE("out-of-order rows rejected") {
    std::istringstream in("1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n");
    CHECK_THROWS_AS(parse_trajectory(in, TrajectoryFormat::tum), NonMonotonicTime);
  }

  SUBCASE("empty input") {
    std::istringstream in("# only a comment\n");
    CHECK_THROWS_AS(parse_trajectory(in, TrajectoryFormat::tum), EmptyTrajectory);
  }

  SUBCASE("quaternions normalized on ingest") {
    std::istringstream in("0.0 0 0 0 0 0 0 2.0\n");
    const Trajectory t = parse_trajectory(in, TrajectoryFormat::tum);
    CHECK(t[0].pose.rotation().norm() == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("EuRoC parsing") {
  SUBCASE("nanosecond split is exact") {
    std::istringstream in(
        "#timestamp,px,py,pz,qw,qx,qy,qz\n"
        "1403636580838555648,4.6,-1.8,0.8,0.53,-0.15,-0.83,-0.08\n"
        "1403636580843555648,4.6,-1.8,0.8,0.53,-0.15,-0.83,-0.08\n");
    const Trajectory t = parse_trajectory(in, TrajectoryFormat::euroc_csv);
    REQUIRE(t.size() == 2);
    // oracle: exact integer split, sec + rem * 1e-9
    const double expect = 1403636580.0 + 838555648 * 1e-9;
    CHECK(t.abs_time(0) == doctest::Approx(expect).epsilon(1e-15));
    // relative spacing survives at nanosecond resolution
    CHECK(t[1].t - t[0].t == doctest::Approx(5e-3).epsilon(1e-12));
  }

  SUBCASE("extra state columns are ignored") {
    std::istringstream in(
        "1000000000,0,0,0,1,0,0,0,9,9,9,9,9,9,9,9,9\n"
        "2000000000,0,0,1,1,0,0,0,9,9,9,9,9,9,9,9,9\n");
    const Trajectory t = parse_trajectory(in, TrajectoryFormat::euroc_csv);
    REQUIRE(t.size() == 2);
    CHECK(t[1].pose.translation().z() == doctest::Approx(1.0));
  }
}

TEST_CASE("serialize-parse round trip") {
  Rng rng(41);
  std::vector<PoseSample> samples;
  double t = 1403636580.8385556;
  for (int k = 0; k < 50; ++k) {
    samples.push_back({t - 1403636580.8385556, oracle::random_transform(rng)});
    t += rng.uniform(0.009, 0.011);
  }
  const Trajectory traj(std::move(samples), "G->H", 1403636580.8385556);

  std::ostringstream out;
  write_tum(out, traj);
  std::istringstream in(out.str());
  const Trajectory back = parse_trajectory(in, TrajectoryFormat::tum);

  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(std::abs(back.abs_time(i) - traj.abs_time(i)) < 1e-9 * traj.abs_time(i));
    CHECK(oracle::pose_distance(back[i].pose.to_matrix(), traj[i].pose.to_matrix()) < 1e-12);
  }
}

TEST_CASE("resample") {
  SUBCASE("constant pose stays constant") {
    const DualQuat p = DualQuat::from_rt(
        Quat::from_axis_angle(Eigen::Vector3d::UnitX(), 0.3), {1, 2, 3});
    const Trajectory t = from_poses({{0, p}, {0.5, p}, {1.0, p}, {1.7, p}});
    const Trajectory r = resample(t, 7.0);
    for (std::size_t i = 0; i < r.size(); ++i)
      CHECK(oracle::pose_distance(r[i].pose.to_matrix(), p.to_matrix()) < 1e-12);
  }

  SUBCASE("midpoint of a geodesic step") {
    const DualQuat a;  // identity
    const DualQuat b = DualQuat::from_rt(
        Quat::from_axis_angle(Eigen::Vector3d::UnitZ(), kPi / 2), {1, 0, 0});
    const Trajectory t = from_poses({{0, a}, {1, b}});
    const DualQuat mid = interpolate_at(t, 0.5);
    CHECK(rotation_angle(mid) == doctest::Approx(kPi / 4).epsilon(1e-12));
    CHECK(mid.translation().isApprox(Eigen::Vector3d(0.5, 0, 0), 1e-12));
  }

  SUBCASE("own timestamps reproduce the poses") {
    Rng rng(43);
    std::vector<PoseSample> samples;
    double t = 0;
    for (int k = 0; k < 40; ++k) {
      samples.push_back({t, oracle::random_transform(rng)});
      t += rng.uniform(0.05, 0.15);
    }
    const Trajectory traj(std::move(samples), "", 2.5);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const DualQuat p = interpolate_at(traj, traj.abs_time(i));
      CHECK(oracle::pose_distance(p.to_matrix(), traj[i].pose.to_matrix()) < 1e-12);
    }
  }

  SUBCASE("span shorter than 2/rate") {
    const Trajectory t = from_poses({{0, DualQuat()}, {0.1, DualQuat()}});
    CHECK_THROWS_AS(resample(t, 1.0), SpanTooShort);
  }

  SUBCASE("gap flags") {
    std::vector<std::pair<double, DualQuat>> samples;
    for (double t = 0; t <= 1.0 + 1e-12; t += 0.1) samples.push_back({t, DualQuat()});
    for (double t = 2.0; t <= 3.0 + 1e-12; t += 0.1) samples.push_back({t, DualQuat()});
    const Trajectory traj = from_poses(std::move(samples));
    std::vector<char> gaps;
    resample_on_grid(traj, 0.0, 10.0, 31, &gaps);
    CHECK(std::count(gaps.begin(), gaps.end(), 1) > 0);   // the hole is flagged
    CHECK(gaps.front() == 0);
    CHECK(gaps.back() == 0);
  }
}

TEST_CASE("shift_time") {
  Rng rng(47);
  std::vector<std::pair<double, DualQuat>> s;
  for (int k = 0; k < 5; ++k) s.push_back({k * 1.0, oracle::random_transform(rng)});
  const Trajectory t = from_poses(std::move(s));

  SUBCASE("zero shift is identity") {
    const Trajectory z = shift_time(t, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(z.abs_time(i) == t.abs_time(i));
  }

  SUBCASE("shift and unshift") {
    const Trajectory back = shift_time(shift_time(t, 0.5), -0.5);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back.abs_time(i) == t.abs_time(i));
  }

  SUBCASE("arithmetic and exact intervals") {
    const Trajectory sh = shift_time(from_poses({{0, DualQuat()}, {1, DualQuat()}, {2, DualQuat()}}), 0.123);
    CHECK(sh.abs_time(0) == doctest::Approx(0.123).epsilon(1e-16));
    CHECK(sh.abs_time(1) == doctest::Approx(1.123).epsilon(1e-16));
    CHECK(sh.abs_time(2) == doctest::Approx(2.123).epsilon(1e-16));
    CHECK(sh[2].t - sh[1].t == 1.0);  // stored intervals bit-exact
  }
}
