#include "stcal/linear_calibration.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "stcal/errors.hpp"
#include "stcal/rng.hpp"

namespace stcal {

namespace {

RelativePosePair make_pair(const Trajectory& hand, const Trajectory& eye, int i, int j) {
  RelativePosePair p;
  p.hand_rel = hand[i].pose.inverse() * hand[j].pose;
  p.eye_rel = eye[i].pose.inverse() * eye[j].pose;
  p.i = i;
  p.j = j;
  return p;
}

bool touches_gap(const std::vector<char>* gaps, int i, int j) {
  return gaps && ((*gaps)[i] || (*gaps)[j]);
}

}  // namespace

std::vector<RelativePosePair> build_relative_pairs(const Trajectory& hand, const Trajectory& eye,
                                                   double eta,
                                                   const std::vector<char>* eye_gaps) {
  if (hand.size() != eye.size())
    throw Error("pair construction requires equal-length trajectories on a shared grid");
  const int n = static_cast<int>(hand.size());
  std::vector<RelativePosePair> pairs;
  int anchor = 0;
  for (int j = 1; j < n; ++j) {
    const DualQuat rel = hand[anchor].pose.inverse() * hand[j].pose;
    if (rotation_angle(rel) >= eta) {
      if (!touches_gap(eye_gaps, anchor, j)) pairs.push_back(make_pair(hand, eye, anchor, j));
      anchor = j;
    }
  }
  if (pairs.size() < 2) throw NoPairs("insufficient rotational excitation for pair construction");
  return pairs;
}

std::vector<RelativePosePair> build_pairs_strategy(const Trajectory& hand, const Trajectory& eye,
                                                   PairStrategy strategy, double eta,
                                                   const std::vector<char>* eye_gaps) {
  if (strategy == PairStrategy::rotconstr)
    return build_relative_pairs(hand, eye, eta, eye_gaps);
  if (hand.size() != eye.size())
    throw Error("pair construction requires equal-length trajectories on a shared grid");
  const int n = static_cast<int>(hand.size());
  std::vector<RelativePosePair> pairs;
  if (strategy == PairStrategy::global) {
    for (int j = 1; j < n; ++j)
      if (!touches_gap(eye_gaps, 0, j)) pairs.push_back(make_pair(hand, eye, 0, j));
  } else {
    for (int i = 0; i + 1 < n; ++i)
      if (!touches_gap(eye_gaps, i, i + 1)) pairs.push_back(make_pair(hand, eye, i, i + 1));
  }
  if (pairs.size() < 2) throw NoPairs("fewer than 2 relative pose pairs");
  return pairs;
}

Eigen::Matrix<double, 6, 8> coefficient_block(const RelativePosePair& pair) {
  const Eigen::Vector3d r = pair.hand_rel.real().vec();
  const Eigen::Vector3d rp = pair.hand_rel.dual().vec();
  const Eigen::Vector3d s = pair.eye_rel.real().vec();
  const Eigen::Vector3d sp = pair.eye_rel.dual().vec();

  Eigen::Matrix<double, 6, 8> S = Eigen::Matrix<double, 6, 8>::Zero();
  S.block<3, 1>(0, 0) = r - s;
  S.block<3, 3>(0, 1) = skew(r + s);
  S.block<3, 1>(3, 0) = rp - sp;
  S.block<3, 3>(3, 1) = skew(rp + sp);
  S.block<3, 1>(3, 4) = r - s;
  S.block<3, 3>(3, 5) = skew(r + s);
  return S;
}

double screw_consistency_E(const RelativePosePair& pair) {
  const ScalarPart h = scalar_part(pair.hand_rel);
  const ScalarPart e = scalar_part(pair.eye_rel);
  const double wh = std::abs(h.omega), we = std::abs(e.omega);
  if (std::min(wh, we) < 1e-12)
    throw DegeneratePair("vanishing standard scalar part (rotation near pi)");
  const double ratio_w = std::max(wh, we) / std::min(wh, we);
  const double wph = std::abs(h.omega_prime), wpe = std::abs(e.omega_prime);
  // Screw translation ~ 0 leaves the second ratio undefined; such motions still
  // constrain rotation, so the ratio is skipped rather than the pair dropped.
  const double ratio_wp =
      (std::min(wph, wpe) < 1e-12) ? 1.0 : std::max(wph, wpe) / std::min(wph, wpe);
  return 0.5 * (ratio_w + ratio_wp);
}

double robust_weight(double E, double mu) { return std::exp(mu * (1.0 - E * E)); }

Eigen::MatrixXd LinearSystem::stacked() const {
  Eigen::MatrixXd M(6 * static_cast<int>(blocks.size()), 8);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    M.middleRows<6>(6 * static_cast<int>(k)) = weights[k] * blocks[k];
  return M;
}

SvdSolve solve_dq_svd(const LinearSystem& system) {
  if (system.blocks.size() < 2) throw Error("need at least 2 blocks for the linear solve");
  const Eigen::MatrixXd M = system.stacked();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();  // descending, 8 values
  if (sv(5) < 1e-12)
    throw IllConditioned("sigma6 ~ 0: fewer than 2 independent rotation axes");

  const Eigen::Matrix<double, 8, 1> v7 = svd.matrixV().col(6);
  const Eigen::Matrix<double, 8, 1> v8 = svd.matrixV().col(7);
  const Eigen::Vector4d u1 = v7.head<4>(), w1 = v7.tail<4>();
  const Eigen::Vector4d u2 = v8.head<4>(), w2 = v8.tail<4>();

  // x = l1 v7 + l2 v8 under  x_std . x_dual = 0  (Pluecker) and |x_std| = 1 (unit):
  //   a s^2 + b s + c = 0 with s = l1/l2
  const double a = u1.dot(w1);
  const double b = u1.dot(w2) + u2.dot(w1);
  const double c = u2.dot(w2);

  struct Candidate {
    double l1, l2, merit;
  };
  std::vector<Candidate> cands;
  auto add_root = [&](double s) {
    const double val = s * s * u1.dot(u1) + 2.0 * s * u1.dot(u2) + u2.dot(u2);
    if (val <= 1e-300) return;
    const double l2 = 1.0 / std::sqrt(val);
    cands.push_back({s * l2, l2, val / (s * s + 1.0)});
  };

  if (std::abs(a) > 1e-14) {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) throw QuadraticDegenerate("complex roots in the constraint quadratic");
    const double sq = std::sqrt(disc);
    // numerically stable root pair
    const double q = -0.5 * (b + (b >= 0 ? sq : -sq));
    add_root(q / a);
    if (std::abs(q) > 1e-300) add_root(c / q);
  } else {
    // v7 already satisfies the Pluecker constraint
    const double val = u1.dot(u1);
    if (val > 1e-300) cands.push_back({1.0 / std::sqrt(val), 0.0, val});
    if (std::abs(b) > 1e-14) add_root(-c / b);
  }
  if (cands.empty()) throw QuadraticDegenerate("no usable root in the constraint quadratic");

  const auto best = *std::max_element(
      cands.begin(), cands.end(),
      [](const Candidate& x, const Candidate& y) { return x.merit < y.merit; });
  const Eigen::Matrix<double, 8, 1> x = best.l1 * v7 + best.l2 * v8;

  const Quat std_part(x(0), x(1), x(2), x(3));
  const Quat dual_part(x(4), x(5), x(6), x(7));
  const double inv = 1.0 / std_part.norm();
  return {DualQuat::from_parts(std_part * inv, dual_part * inv), sv(6) / sv(5)};
}

bool inlier_check(const DualQuat& x, const RelativePosePair& pair, double phi, double psi) {
  const DualQuat residual = x * pair.eye_rel * x.inverse() * pair.hand_rel.inverse();
  return rotation_angle(residual) < phi && translation_norm(residual) < psi;
}

namespace {

// Observability guard for the minimal sample: both hand rotations well defined and
// their axes more than 1 degree from parallel.
bool sample_ok(const RelativePosePair& p1, const RelativePosePair& p2) {
  const ScrewParams s1 = screw_decompose(p1.hand_rel);
  const ScrewParams s2 = screw_decompose(p2.hand_rel);
  if (s1.degenerate || s2.degenerate) return false;
  const double cosang = std::abs(s1.axis.dot(s2.axis));
  return cosang < std::cos(deg2rad(1.0));
}

}  // namespace

CalibrationResult ransac_calibrate(const std::vector<RelativePosePair>& pairs,
                                   const CalibrationConfig& cfg) {
  const int n = static_cast<int>(pairs.size());
  if (n < 2) throw NoPairs("RANSAC needs at least 2 pairs");
  if (cfg.max_iterations < 1 || cfg.min_inliers < 2) throw Error("invalid calibration config");

  // Pair scores are iteration-independent; compute once. Degenerate pairs keep weight 0
  // and are excluded from weighted systems.
  std::vector<double> weights(n, 0.0);
  for (int k = 0; k < n; ++k) {
    if (!cfg.robust_kernel) {
      weights[k] = 1.0;
      continue;
    }
    try {
      weights[k] = robust_weight(screw_consistency_E(pairs[k]), cfg.mu);
    } catch (const DegeneratePair&) {
      weights[k] = 0.0;
    }
  }

  struct Best {
    double quality = std::numeric_limits<double>::infinity();
    int iteration = -1;
    DualQuat extrinsic;
    std::vector<char> mask;
    int inliers = 0;
  } best;

  int classified_iterations = 0;
  std::string last_failure;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    Rng rng = Rng::derive(cfg.rng_seed, static_cast<std::uint64_t>(iter));

    // Minimal 2-pair sample; resample degenerate draws a bounded number of times.
    int ia = -1, ib = -1;
    for (int attempt = 0; attempt < 32; ++attempt) {
      ia = static_cast<int>(rng.index(n));
      ib = static_cast<int>(rng.index(n));
      if (ia == ib) continue;
      if (sample_ok(pairs[ia], pairs[ib])) break;
      ia = -1;
    }
    if (ia < 0) continue;

    LinearSystem minimal;
    minimal.blocks = {coefficient_block(pairs[ia]), coefficient_block(pairs[ib])};
    minimal.weights = {1.0, 1.0};
    DualQuat x_init;
    try {
      x_init = solve_dq_svd(minimal).extrinsic;
    } catch (const Error& e) {
      last_failure = e.what();
      continue;
    }

    ++classified_iterations;
    std::vector<char> mask(n, 0);
    int inliers = 0;
    for (int k = 0; k < n; ++k) {
      if (inlier_check(x_init, pairs[k], cfg.phi, cfg.psi)) {
        mask[k] = 1;
        ++inliers;
      }
    }
    if (inliers < cfg.min_inliers) continue;

    LinearSystem refined;
    refined.blocks.reserve(inliers);
    refined.weights.reserve(inliers);
    for (int k = 0; k < n; ++k) {
      if (!mask[k] || weights[k] <= 0.0) continue;
      refined.blocks.push_back(coefficient_block(pairs[k]));
      refined.weights.push_back(weights[k]);
    }
    if (static_cast<int>(refined.blocks.size()) < 2) continue;

    SvdSolve solve;
    try {
      solve = solve_dq_svd(refined);
    } catch (const Error& e) {
      last_failure = e.what();
      continue;
    }

    if (solve.sigma_ratio < best.quality) {
      best.quality = solve.sigma_ratio;
      best.iteration = iter;
      best.extrinsic = solve.extrinsic;
      best.mask = std::move(mask);
      best.inliers = inliers;
    }
  }

  if (best.iteration < 0) {
    // IllConditioned only when every iteration died inside the solver
    if (classified_iterations == 0 && !last_failure.empty()) throw IllConditioned(last_failure);
    throw NoConsensus("no RANSAC iteration reached the inlier minimum");
  }

  CalibrationResult out;
  out.extrinsic = best.extrinsic;
  out.inlier_mask = std::move(best.mask);
  out.quality = best.quality;
  out.iterations_used = cfg.max_iterations;
  out.inlier_count = best.inliers;
  out.pair_count = n;
  return out;
}

}  // namespace stcal
