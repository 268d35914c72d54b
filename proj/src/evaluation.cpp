#include "stcal/evaluation.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "stcal/errors.hpp"

namespace stcal {

AlignmentSE3 umeyama_align(const std::vector<Eigen::Vector3d>& src,
                           const std::vector<Eigen::Vector3d>& dst, bool with_scale) {
  if (src.size() != dst.size()) throw Error("umeyama: point counts differ");
  const std::size_t n = src.size();
  if (n < 3) throw DegenerateGeometry("umeyama needs at least 3 correspondences");

  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_d = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= static_cast<double>(n);
  mu_d /= static_cast<double>(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d ps = src[i] - mu_s;
    const Eigen::Vector3d pd = dst[i] - mu_d;
    cov += pd * ps.transpose();
    var_s += ps.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_s /= static_cast<double>(n);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) < 1e-12 * std::max(sv(0), 1e-300))
    throw DegenerateGeometry("collinear or coincident point sets");

  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2) = -1.0;
  const Eigen::Matrix3d R = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();

  AlignmentSE3 out;
  out.rotation = Quat::from_matrix(R);
  out.scale = with_scale ? (sv(0) * d(0) + sv(1) * d(1) + sv(2) * d(2)) / var_s : 1.0;
  if (!(out.scale > 0.0)) throw DegenerateGeometry("non-positive similarity scale");
  out.translation = mu_d - out.scale * R * mu_s;
  return out;
}

Trajectory transform_ground_truth(const Trajectory& hand, const CalibrationResult& result) {
  std::vector<PoseSample> out;
  out.reserve(hand.size());
  for (std::size_t i = 0; i < hand.size(); ++i)
    out.push_back({hand[i].t, hand[i].pose * result.extrinsic});
  // move stamps onto the eye clock: t_hand = t_eye + dt
  return Trajectory(std::move(out), hand.frame_label(), hand.epoch() - result.dt);
}

MetricReport compute_ape_are(const Trajectory& est, const Trajectory& gt, double max_dt) {
  MetricReport rep;
  std::size_t j = 0;
  double sum_p2 = 0.0, sum_r2 = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est.abs_time(i);
    while (j + 1 < gt.size() &&
           std::abs(gt.abs_time(j + 1) - t) <= std::abs(gt.abs_time(j) - t))
      ++j;
    if (std::abs(gt.abs_time(j) - t) > max_dt) continue;
    const Eigen::Vector3d dp = est[i].pose.translation() - gt[j].pose.translation();
    const DualQuat drel = est[i].pose.inverse() * gt[j].pose;
    const double ang = rad2deg(rotation_angle(drel));
    rep.per_sample_pos_err.push_back(dp.norm());
    rep.per_sample_rot_err.push_back(ang);
    rep.matched_times.push_back(t);
    sum_p2 += dp.squaredNorm();
    sum_r2 += ang * ang;
  }
  rep.matched_count = static_cast<int>(rep.per_sample_pos_err.size());
  if (rep.matched_count == 0) throw NoMatches("no timestamp associations within max_dt");
  rep.ape_rmse = std::sqrt(sum_p2 / rep.matched_count);
  rep.are_rmse = std::sqrt(sum_r2 / rep.matched_count);
  return rep;
}

std::pair<double, double> extrinsic_error(const DualQuat& est, const DualQuat& ref) {
  const DualQuat residual = est * ref.inverse();
  return {translation_norm(residual), rad2deg(rotation_angle(residual))};
}

double relative_translation_check(const CalibrationResult& a, const CalibrationResult& b) {
  return translation_norm(a.extrinsic * b.extrinsic.inverse());
}

EvaluationOutcome evaluate_against_ground_truth(const Trajectory& est, const Trajectory& hand_raw,
                                                const CalibrationResult& calib, bool with_scale,
                                                double max_dt, bool umeyama) {
  Trajectory gt = transform_ground_truth(hand_raw, calib);

  EvaluationOutcome out;
  out.alignment = AlignmentSE3{};
  if (umeyama) {
    // associate first so the alignment is estimated on matched samples only
    std::vector<Eigen::Vector3d> src, dst;
    std::size_t j = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      const double t = est.abs_time(i);
      while (j + 1 < gt.size() &&
             std::abs(gt.abs_time(j + 1) - t) <= std::abs(gt.abs_time(j) - t))
        ++j;
      if (std::abs(gt.abs_time(j) - t) > max_dt) continue;
      src.push_back(gt[j].pose.translation());
      dst.push_back(est[i].pose.translation());
    }
    if (src.size() < 3) throw NoMatches("fewer than 3 associations for global alignment");
    out.alignment = umeyama_align(src, dst, with_scale);
  }

  std::vector<PoseSample> aligned;
  aligned.reserve(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Quat r = (out.alignment.rotation * gt[i].pose.rotation()).normalized();
    const Eigen::Vector3d p = out.alignment.apply(gt[i].pose.translation());
    aligned.push_back({gt[i].t, DualQuat::from_rt(r, p)});
  }
  out.aligned_gt = Trajectory(std::move(aligned), gt.frame_label(), gt.epoch());
  out.metrics = compute_ape_are(est, out.aligned_gt, max_dt);
  return out;
}

}  // namespace stcal
