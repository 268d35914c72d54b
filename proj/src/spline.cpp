#include "stcal/spline.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>

#include "stcal/errors.hpp"

namespace stcal {

SplinePose::SplinePose(int order, double first_knot, double knot_spacing,
                       std::vector<Quat> rot_vertices, std::vector<Eigen::Vector3d> trans_vertices)
    : order_(order),
      first_knot_(first_knot),
      spacing_(knot_spacing),
      rot_vertices_(std::move(rot_vertices)),
      trans_vertices_(std::move(trans_vertices)) {
  if (order_ < 2 || order_ > 8) throw Error("spline order must be in [2, 8]");
  if (spacing_ <= 0.0) throw Error("knot spacing must be positive");
  if (rot_vertices_.size() != trans_vertices_.size())
    throw Error("rotation/translation vertex counts differ");
  if (num_knots() < 2 * order_) throw Error("need N >= 2*order knots");
  for (auto& q : rot_vertices_) q = q.normalized();
  sign_align_rot_vertices();
}

void SplinePose::sign_align_rot_vertices() {
  for (std::size_t k = 1; k < rot_vertices_.size(); ++k) {
    if (rot_vertices_[k - 1].dot(rot_vertices_[k]) < 0.0) rot_vertices_[k] = -rot_vertices_[k];
  }
}

int SplinePose::segment_index(double t) const {
  if (t < domain_start() - 1e-9 || t > domain_end() + 1e-9)
    throw OutOfDomain("spline evaluated outside its valid domain");
  int i = static_cast<int>(std::floor((t - first_knot_) / spacing_));
  return std::clamp(i, order_ - 1, num_vertices() - 1);
}

void SplinePose::basis_weights(double t, int& first_vertex, double* weights) const {
  const int i = segment_index(t);
  first_vertex = i - order_ + 1;
  const int p = order_ - 1;  // degree
  // Cox-de Boor triangular recursion over the nonzero window.
  double left[8], right[8];
  weights[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knot(i + 1 - j);
    right[j] = knot(i + j) - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = weights[r] / (right[r + 1] + left[j - r]);
      weights[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    weights[j] = saved;
  }
}

void SplinePose::cumulative_weights(double t, int& first_vertex, double* lambda) const {
  double w[8];
  basis_weights(t, first_vertex, w);
  lambda[0] = 1.0;
  double acc = 0.0;
  for (int j = order_ - 1; j >= 1; --j) {
    acc += w[j];
    lambda[j] = acc;
  }
}

Quat SplinePose::eval_rotation(double t) const {
  int l = 0;
  double lambda[8];
  cumulative_weights(t, l, lambda);
  Quat q = rot_vertices_[l];
  for (int j = 1; j < order_; ++j) {
    const Eigen::Vector3d d =
        (rot_vertices_[l + j - 1].conjugate() * rot_vertices_[l + j]).log_map();
    q = q * Quat::exp_map(lambda[j] * d);
  }
  return q.normalized();
}

Eigen::Vector3d SplinePose::eval_translation(double t) const {
  int l = 0;
  double w[8];
  basis_weights(t, l, w);
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int j = 0; j < order_; ++j) p += w[j] * trans_vertices_[l + j];
  return p;
}

PoseRT SplinePose::eval(double t) const { return {eval_rotation(t), eval_translation(t)}; }

SplineFit fit_spline(const Trajectory& traj, int order, double knot_spacing) {
  if (order < 2 || order > 7) throw Error("spline order must be in [2, 7]");
  const double a = traj.abs_start();
  const double b = traj.abs_end();
  if (!(b - a >= 2.0 * order * knot_spacing))
    throw SpanTooShort("trajectory span below 2*order*knot_spacing");

  const double first_knot = a - (order - 1) * knot_spacing;
  int vcount = static_cast<int>(std::ceil((b - first_knot) / knot_spacing - 1e-9));
  while (first_knot + vcount * knot_spacing < b - 1e-9) ++vcount;
  vcount = std::max(vcount, order);

  const std::size_t n = traj.size();

  // Initialize rotation vertices from the samples nearest their Greville times.
  std::vector<Quat> rot_v(vcount);
  std::vector<Eigen::Vector3d> trans_v(vcount, Eigen::Vector3d::Zero());
  for (int k = 0; k < vcount; ++k) {
    const double greville = first_knot + (k + 0.5 * order) * knot_spacing;
    const double t = std::clamp(greville, a, b);
    // nearest sample
    std::size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (traj.abs_time(mid) <= t)
        lo = mid;
      else
        hi = mid;
    }
    const std::size_t idx = (t - traj.abs_time(lo) <= traj.abs_time(hi) - t) ? lo : hi;
    rot_v[k] = traj[idx].pose.rotation();
    trans_v[k] = traj[idx].pose.translation();
  }

  SplinePose spline(order, first_knot, knot_spacing, std::move(rot_v), std::move(trans_v));

  // Translation: linear least squares on the basis weights (banded normal equations).
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n * order * order);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(vcount, 3);
    double w[8];
    for (std::size_t s = 0; s < n; ++s) {
      int first = 0;
      spline.basis_weights(traj.abs_time(s), first, w);
      const Eigen::Vector3d p = traj[s].pose.translation();
      for (int r = 0; r < order; ++r) {
        for (int c = 0; c < order; ++c)
          trips.emplace_back(first + r, first + c, w[r] * w[c]);
        rhs.row(first + r) += w[r] * p.transpose();
      }
    }
    // tiny pull toward the nearest-sample init guards barely-supported end vertices
    for (int k = 0; k < vcount; ++k) {
      trips.emplace_back(k, k, 1e-10);
      rhs.row(k) += 1e-10 * spline.trans_vertices()[k].transpose();
    }
    Eigen::SparseMatrix<double> ata(vcount, vcount);
    ata.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(ata);
    if (ldlt.info() != Eigen::Success) throw Error("translation spline fit is singular");
    const Eigen::MatrixXd sol = ldlt.solve(rhs);
    for (int k = 0; k < vcount; ++k) spline.trans_vertices()[k] = sol.row(k).transpose();
  }

  // Rotation: Gauss-Newton on geodesic residuals r_s = LOG(q(t_s)^-1 q_obs), vertex
  // Jacobians by central differences on right perturbations.
  const double h = 1e-6;
  for (int sweep = 0; sweep < 5; ++sweep) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n * 9 * order * order);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * vcount);
    double lambda_buf[8];
    for (std::size_t s = 0; s < n; ++s) {
      const double t = traj.abs_time(s);
      int first = 0;
      spline.cumulative_weights(t, first, lambda_buf);
      const Quat q_obs = traj[s].pose.rotation();
      const Eigen::Vector3d r0 = (spline.eval_rotation(t).conjugate() * q_obs).log_map();
      Eigen::Matrix<double, 3, Eigen::Dynamic> J(3, 3 * order);
      for (int v = 0; v < order; ++v) {
        Quat& qv = spline.rot_vertices()[first + v];
        const Quat saved = qv;
        for (int d = 0; d < 3; ++d) {
          Eigen::Vector3d delta = Eigen::Vector3d::Zero();
          delta[d] = h;
          qv = saved * Quat::exp_map(delta);
          const Eigen::Vector3d rp = (spline.eval_rotation(t).conjugate() * q_obs).log_map();
          qv = saved * Quat::exp_map(-delta);
          const Eigen::Vector3d rm = (spline.eval_rotation(t).conjugate() * q_obs).log_map();
          qv = saved;
          J.col(3 * v + d) = (rp - rm) / (2.0 * h);
        }
      }
      for (int rv = 0; rv < order; ++rv) {
        for (int cv = 0; cv < order; ++cv) {
          const Eigen::Matrix3d blk =
              J.middleCols(3 * rv, 3).transpose() * J.middleCols(3 * cv, 3);
          for (int rr = 0; rr < 3; ++rr)
            for (int cc = 0; cc < 3; ++cc)
              trips.emplace_back(3 * (first + rv) + rr, 3 * (first + cv) + cc, blk(rr, cc));
        }
        g.segment<3>(3 * (first + rv)) += J.middleCols(3 * rv, 3).transpose() * r0;
      }
    }
    for (int k = 0; k < 3 * vcount; ++k) trips.emplace_back(k, k, 1e-10);
    Eigen::SparseMatrix<double> jtj(3 * vcount, 3 * vcount);
    jtj.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(jtj);
    if (ldlt.info() != Eigen::Success) throw Error("rotation spline fit is singular");
    const Eigen::VectorXd delta = ldlt.solve(-g);
    for (int k = 0; k < vcount; ++k) {
      spline.rot_vertices()[k] =
          spline.rot_vertices()[k] * Quat::exp_map(delta.segment<3>(3 * k));
    }
    spline.sign_align_rot_vertices();
  }

  double max_rot = 0.0, max_trans = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double t = traj.abs_time(s);
    const PoseRT m = spline.eval(t);
    max_rot = std::max(max_rot,
                       (m.rotation.conjugate() * traj[s].pose.rotation()).log_map().norm());
    max_trans = std::max(max_trans, (m.translation - traj[s].pose.translation()).norm());
  }
  return {std::move(spline), max_rot, max_trans};
}

}  // namespace stcal
