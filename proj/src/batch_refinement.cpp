#include "stcal/batch_refinement.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>

#include "stcal/errors.hpp"

namespace stcal {

Eigen::Matrix3d so3_right_jacobian_inverse(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d W = skew(phi);
  if (theta < 1e-6) return Eigen::Matrix3d::Identity() + 0.5 * W + (1.0 / 12.0) * W * W;
  const double theta2 = theta * theta;
  const double k = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() + 0.5 * W + k * W * W;
}

Eigen::Matrix<double, 6, 1> relative_residual(const PoseRT& ta, const PoseRT& tb,
                                              const PoseRT& ta_obs, const PoseRT& tb_obs) {
  const PoseRT delta_model = compose(inverse(ta), tb);
  const PoseRT delta_obs = compose(inverse(ta_obs), tb_obs);
  const PoseRT err = compose(delta_model, inverse(delta_obs));
  Eigen::Matrix<double, 6, 1> r;
  r.head<3>() = err.rotation.log_map();
  r.tail<3>() = err.translation;
  return r;
}

void relative_residual_jacobians(const PoseRT& ta, const PoseRT& tb, const PoseRT& ta_obs,
                                 const PoseRT& tb_obs, Eigen::Matrix<double, 6, 6>& Ja,
                                 Eigen::Matrix<double, 6, 6>& Jb) {
  const PoseRT delta_model = compose(inverse(ta), tb);
  const PoseRT c = inverse(compose(inverse(ta_obs), tb_obs));
  const PoseRT err = compose(delta_model, c);
  const Eigen::Vector3d phi = err.rotation.log_map();

  const Eigen::Matrix3d Jr_inv = so3_right_jacobian_inverse(phi);
  const Eigen::Matrix3d Jl_inv = Jr_inv.transpose();  // Jl^-1(phi) = Jr^-1(phi)^T
  const Eigen::Matrix3d Rc = c.rotation.to_matrix();
  const Eigen::Matrix3d Rm = delta_model.rotation.to_matrix();
  const Eigen::Matrix3d RaT = ta.rotation.conjugate().to_matrix();

  Ja.setZero();
  Jb.setZero();
  // rotation rows
  Ja.block<3, 3>(0, 0) = -Jl_inv;
  Jb.block<3, 3>(0, 0) = Jr_inv * Rc.transpose();
  // translation rows: t_err = Rm t_c + Ra^T (t_b - t_a)
  Ja.block<3, 3>(3, 0) = skew(err.translation);
  Jb.block<3, 3>(3, 0) = -Rm * skew(c.translation);
  Ja.block<3, 3>(3, 3) = -RaT;
  Jb.block<3, 3>(3, 3) = RaT;
}

namespace {

double huber(double s, double delta) {  // on the residual norm s, quadratic below delta
  return (s <= delta) ? s * s : delta * (2.0 * s - delta);
}

double huber_irls_weight(double s, double delta) { return (s <= delta) ? 1.0 : delta / s; }

struct KahanSum {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

struct PairRef {
  int a, b;     // indices into the hand/eye observation arrays
  bool is_eye;
};

// Shared state for total_cost and the optimizer: observation tables, pair lists, the
// current parameters, and pose evaluation with per-unique-time caching.
class Evaluator {
public:
  explicit Evaluator(const RefinementProblem& p)
      : cfg_(p.cfg),
        spline_(p.spline),
        ext_{p.extrinsic.rotation(), p.extrinsic.translation()},
        dt_(p.dt) {
    const double trust = 0.5 * p.eye_obs.median_period();
    dt_min_ = p.dt - trust;
    dt_max_ = p.dt + trust;

    const double lo = spline_.domain_start();
    const double hi = spline_.domain_end();
    const double margin = 2e-6;  // numeric-dt probes must stay evaluable

    hand_t_.reserve(p.hand_obs.size());
    hand_pose_.reserve(p.hand_obs.size());
    for (std::size_t h = 0; h < p.hand_obs.size(); ++h) {
      hand_t_.push_back(p.hand_obs.abs_time(h));
      hand_pose_.push_back(to_pose_rt(p.hand_obs[h].pose));
    }
    for (std::size_t h = 0; h + 1 < p.hand_obs.size(); ++h) {
      if (hand_t_[h] < lo || hand_t_[h + 1] > hi) continue;
      pairs_.push_back({static_cast<int>(h), static_cast<int>(h + 1), false});
    }

    eye_t_.reserve(p.eye_obs.size());
    eye_pose_.reserve(p.eye_obs.size());
    for (std::size_t e = 0; e < p.eye_obs.size(); ++e) {
      eye_t_.push_back(p.eye_obs.abs_time(e));
      eye_pose_.push_back(to_pose_rt(p.eye_obs[e].pose));
    }
    int dropped = 0;
    for (std::size_t e = 0; e + 1 < p.eye_obs.size(); ++e) {
      // must stay in-domain across the whole dt trust region
      if (eye_t_[e] + dt_min_ - margin < lo || eye_t_[e + 1] + dt_max_ + margin > hi) {
        ++dropped;
        continue;
      }
      pairs_.push_back({static_cast<int>(e), static_cast<int>(e + 1), true});
    }
    dropped_eye_pairs_ = dropped;
    const double frac =
        static_cast<double>(dropped) / std::max<std::size_t>(1, p.eye_obs.size() - 1);
    if (frac > cfg_.max_boundary_drop)
      throw OutOfDomain("dt shift pushes too many eye observations off the spline");
    if (pairs_.empty()) throw Error("refinement has no usable residuals");
  }

  const RefinementConfig& cfg() const { return cfg_; }
  SplinePose& spline() { return spline_; }
  const SplinePose& spline() const { return spline_; }
  PoseRT& extrinsic() { return ext_; }
  const PoseRT& extrinsic() const { return ext_; }
  double& dt() { return dt_; }
  double dt() const { return dt_; }
  double dt_min() const { return dt_min_; }
  double dt_max() const { return dt_max_; }
  int dropped_eye_pairs() const { return dropped_eye_pairs_; }
  const std::vector<PairRef>& pairs() const { return pairs_; }

  double obs_time(const PairRef& p, bool second) const {
    const auto& t = p.is_eye ? eye_t_ : hand_t_;
    return t[second ? p.b : p.a];
  }
  double hand_time(int i) const { return hand_t_[i]; }
  double eye_time(int i) const { return eye_t_[i]; }
  const PoseRT& obs_pose(const PairRef& p, bool second) const {
    const auto& o = p.is_eye ? eye_pose_ : hand_pose_;
    return o[second ? p.b : p.a];
  }

  // model pose for one observation of a pair at a given dt
  PoseRT model_pose(const PairRef& p, bool second, double dt) const {
    const double t = obs_time(p, second);
    const PoseRT s = spline_.eval(p.is_eye ? t + dt : t);
    return p.is_eye ? compose(s, ext_) : s;
  }

  Eigen::Matrix<double, 6, 1> residual(const PairRef& p, double dt) const {
    return relative_residual(model_pose(p, false, dt), model_pose(p, true, dt),
                             obs_pose(p, false), obs_pose(p, true));
  }

  double cost() const {
    // evaluate each unique observation time once
    std::vector<PoseRT> hand_model(hand_t_.size()), eye_model(eye_t_.size());
    std::vector<char> hand_done(hand_t_.size(), 0), eye_done(eye_t_.size(), 0);
    auto model_at = [&](const PairRef& p, int idx) -> const PoseRT& {
      auto& done = p.is_eye ? eye_done : hand_done;
      auto& cache = p.is_eye ? eye_model : hand_model;
      if (!done[idx]) {
        const double t = p.is_eye ? eye_t_[idx] + dt_ : hand_t_[idx];
        const PoseRT s = spline_.eval(t);
        cache[idx] = p.is_eye ? compose(s, ext_) : s;
        done[idx] = 1;
      }
      return cache[idx];
    };
    KahanSum acc;
    for (const auto& p : pairs_) {
      const Eigen::Matrix<double, 6, 1> r = relative_residual(
          model_at(p, p.a), model_at(p, p.b), obs_pose(p, false), obs_pose(p, true));
      const double sr = p.is_eye ? cfg_.sigma_rot_eye : cfg_.sigma_rot_hand;
      const double st = p.is_eye ? cfg_.sigma_trans_eye : cfg_.sigma_trans_hand;
      acc.add(huber(r.head<3>().norm(), cfg_.huber_rot) / (sr * sr));
      acc.add(huber(r.tail<3>().norm(), cfg_.huber_trans) / (st * st));
    }
    return acc.sum;
  }

  std::size_t hand_count() const { return hand_t_.size(); }
  std::size_t eye_count() const { return eye_t_.size(); }

private:
  RefinementConfig cfg_;
  SplinePose spline_;
  PoseRT ext_;
  double dt_;
  double dt_min_ = 0.0, dt_max_ = 0.0;
  int dropped_eye_pairs_ = 0;
  std::vector<double> hand_t_, eye_t_;
  std::vector<PoseRT> hand_pose_, eye_pose_;
  std::vector<PairRef> pairs_;
};

// One model evaluation time: current vertex window, translation basis weights and the
// numeric response of the spline rotation to vertex right-perturbations.
struct TimeEval {
  PoseRT spline_pose;
  int first = 0;
  double basis[8];
  Eigen::Matrix<double, 3, 24> drot;  // column 3v+d
};

}  // namespace

RefinementProblem make_refinement_problem(const Trajectory& hand, const Trajectory& eye,
                                          const DualQuat& extrinsic_init, double dt_init,
                                          const RefinementConfig& cfg) {
  SplineFit fit = fit_spline(hand, cfg.order, cfg.knot_spacing);
  return RefinementProblem{hand, eye, std::move(fit.spline), extrinsic_init, dt_init, cfg};
}

double total_cost(const RefinementProblem& problem) { return Evaluator(problem).cost(); }

RefinementResult refine(const RefinementProblem& problem) {
  Evaluator ev(problem);
  const RefinementConfig& cfg = ev.cfg();
  const int order = ev.spline().order();
  const int nv = ev.spline().num_vertices();
  const int ext_col = 6 * nv;
  const int dt_col = ext_col + 6;
  const int P = dt_col + 1;
  const double h_rot = 1e-6;
  const double h_dt = 1e-7;

  RefinementReport report;
  report.numeric_blocks = {"rot_vertices", "dt"};
  report.dropped_eye_pairs = ev.dropped_eye_pairs();

  const double initial_cost = ev.cost();
  report.initial_cost = initial_cost;

  // Sparsity pattern from dt-trust-region-widened vertex windows.
  Eigen::SparseMatrix<double> H(P, P);
  {
    std::vector<Eigen::Triplet<double>> pattern;
    double wbuf[8];
    auto window = [&](double t, int& lo, int& hi) {
      int f = 0;
      ev.spline().basis_weights(t, f, wbuf);
      lo = f;
      hi = f + order - 1;
    };
    for (const auto& p : ev.pairs()) {
      const double ta = ev.obs_time(p, false);
      const double tb = ev.obs_time(p, true);
      int lo_a, hi_a, lo_b, hi_b;
      if (p.is_eye) {
        int l0, h0, l1, h1;
        window(ta + ev.dt_min(), l0, h0);
        window(ta + ev.dt_max(), l1, h1);
        lo_a = std::min(l0, l1);
        hi_a = std::max(h0, h1);
        window(tb + ev.dt_min(), l0, h0);
        window(tb + ev.dt_max(), l1, h1);
        lo_b = std::min(l0, l1);
        hi_b = std::max(h0, h1);
      } else {
        window(ta, lo_a, hi_a);
        window(tb, lo_b, hi_b);
      }
      std::vector<int> cols;
      for (int v = std::min(lo_a, lo_b); v <= std::max(hi_a, hi_b); ++v) {
        for (int d = 0; d < 3; ++d) {
          cols.push_back(3 * v + d);
          cols.push_back(3 * nv + 3 * v + d);
        }
      }
      if (p.is_eye) {
        for (int d = 0; d < 7; ++d) cols.push_back(ext_col + d);
      }
      for (int r : cols)
        for (int c : cols) pattern.emplace_back(r, c, 0.0);
    }
    for (int d = 0; d < P; ++d) pattern.emplace_back(d, d, 0.0);
    H.setFromTriplets(pattern.begin(), pattern.end());
    H.makeCompressed();
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.analyzePattern(H);

  Eigen::VectorXd g(P);
  std::vector<TimeEval> hand_te(ev.hand_count()), eye_te(ev.eye_count());
  std::vector<char> hand_done(ev.hand_count()), eye_done(ev.eye_count());

  auto eval_time = [&](double t, TimeEval& te) {
    te.spline_pose = ev.spline().eval(t);
    ev.spline().basis_weights(t, te.first, te.basis);
    for (int v = 0; v < order; ++v) {
      Quat& qv = ev.spline().rot_vertices()[te.first + v];
      const Quat saved = qv;
      for (int d = 0; d < 3; ++d) {
        Eigen::Vector3d delta = Eigen::Vector3d::Zero();
        delta[d] = h_rot;
        qv = saved * Quat::exp_map(delta);
        const Quat rp = ev.spline().eval_rotation(t);
        qv = saved * Quat::exp_map(-delta);
        const Quat rm = ev.spline().eval_rotation(t);
        qv = saved;
        const Eigen::Vector3d dp = (te.spline_pose.rotation.conjugate() * rp).log_map();
        const Eigen::Vector3d dm = (te.spline_pose.rotation.conjugate() * rm).log_map();
        te.drot.col(3 * v + d) = (dp - dm) / (2.0 * h_rot);
      }
    }
  };

  auto assemble = [&]() {
    std::fill(H.valuePtr(), H.valuePtr() + H.nonZeros(), 0.0);
    g.setZero();
    std::fill(hand_done.begin(), hand_done.end(), 0);
    std::fill(eye_done.begin(), eye_done.end(), 0);
    const Eigen::Matrix3d Rx = ev.extrinsic().rotation.to_matrix();
    const Eigen::Matrix3d tX_hat = skew(ev.extrinsic().translation);

    auto te_at = [&](bool is_eye, int idx) -> const TimeEval& {
      auto& done = is_eye ? eye_done : hand_done;
      auto& cache = is_eye ? eye_te : hand_te;
      if (!done[idx]) {
        const double t = is_eye ? ev.eye_time(idx) + ev.dt() : ev.hand_time(idx);
        eval_time(t, cache[idx]);
        done[idx] = 1;
      }
      return cache[idx];
    };

    for (const auto& p : ev.pairs()) {
      const TimeEval& ea = te_at(p.is_eye, p.a);
      const TimeEval& eb = te_at(p.is_eye, p.b);

      const PoseRT pose_a = p.is_eye ? compose(ea.spline_pose, ev.extrinsic()) : ea.spline_pose;
      const PoseRT pose_b = p.is_eye ? compose(eb.spline_pose, ev.extrinsic()) : eb.spline_pose;

      Eigen::Matrix<double, 6, 1> r =
          relative_residual(pose_a, pose_b, ev.obs_pose(p, false), ev.obs_pose(p, true));
      Eigen::Matrix<double, 6, 6> Ja, Jb;
      relative_residual_jacobians(pose_a, pose_b, ev.obs_pose(p, false), ev.obs_pose(p, true),
                                  Ja, Jb);

      const int lo = std::min(ea.first, eb.first);
      const int hi = std::max(ea.first, eb.first) + order - 1;
      const int nwin = hi - lo + 1;
      const int ncols = 6 * nwin + (p.is_eye ? 7 : 0);
      Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, ncols);
      J.setZero();
      std::vector<int> colmap(ncols);
      for (int v = 0; v < nwin; ++v)
        for (int d = 0; d < 3; ++d) {
          colmap[3 * v + d] = 3 * (lo + v) + d;
          colmap[3 * nwin + 3 * v + d] = 3 * nv + 3 * (lo + v) + d;
        }

      // chain: residual-pose (analytic) x pose-vertex (rotation numeric, translation
      // basis weights); eye poses additionally chain through the extrinsic
      auto add_pose = [&](const Eigen::Matrix<double, 6, 6>& Jp, const TimeEval& te) {
        const Eigen::Matrix<double, 6, 3> Jrot = Jp.template block<6, 3>(0, 0);
        const Eigen::Matrix<double, 6, 3> Jtrans = Jp.template block<6, 3>(0, 3);
        Eigen::Matrix<double, 6, 3> Jrot_s = Jrot;
        if (p.is_eye) {
          const Eigen::Matrix3d Rs = te.spline_pose.rotation.to_matrix();
          Jrot_s = Jrot * Rx.transpose() - Jtrans * (Rs * tX_hat);
          J.middleCols<3>(6 * nwin) += Jrot;
          J.middleCols<3>(6 * nwin + 3) += Jtrans * Rs;
        }
        const int off = te.first - lo;
        for (int v = 0; v < order; ++v) {
          J.middleCols<3>(3 * (off + v)) += Jrot_s * te.drot.middleCols<3>(3 * v);
          J.middleCols<3>(3 * nwin + 3 * (off + v)) += Jtrans * te.basis[v];
        }
      };
      add_pose(Ja, ea);
      add_pose(Jb, eb);

      if (p.is_eye) {
        // dt column by central differences through the spline evaluation
        const Eigen::Matrix<double, 6, 1> rp = ev.residual(p, ev.dt() + h_dt);
        const Eigen::Matrix<double, 6, 1> rm = ev.residual(p, ev.dt() - h_dt);
        J.col(6 * nwin + 6) = (rp - rm) / (2.0 * h_dt);
        for (int d = 0; d < 7; ++d) colmap[6 * nwin + d] = ext_col + d;
      }

      // covariance + Huber IRLS scaling
      const double sr = p.is_eye ? cfg.sigma_rot_eye : cfg.sigma_rot_hand;
      const double st = p.is_eye ? cfg.sigma_trans_eye : cfg.sigma_trans_hand;
      const double wr = std::sqrt(huber_irls_weight(r.head<3>().norm(), cfg.huber_rot)) / sr;
      const double wt = std::sqrt(huber_irls_weight(r.tail<3>().norm(), cfg.huber_trans)) / st;
      r.head<3>() *= wr;
      r.tail<3>() *= wt;
      J.topRows<3>() *= wr;
      J.bottomRows<3>() *= wt;

      const Eigen::MatrixXd JtJ = J.transpose() * J;
      const Eigen::VectorXd Jtr = J.transpose() * r;
      for (int rr = 0; rr < ncols; ++rr) {
        g(colmap[rr]) += Jtr(rr);
        for (int cc = 0; cc < ncols; ++cc)
          H.coeffRef(colmap[rr], colmap[cc]) += JtJ(rr, cc);
      }
    }
  };

  auto apply_step = [&](Evaluator& e, const Eigen::VectorXd& delta, bool& dt_clamped) {
    for (int k = 0; k < nv; ++k) {
      Quat& q = e.spline().rot_vertices()[k];
      q = (q * Quat::exp_map(delta.segment<3>(3 * k))).normalized();
      e.spline().trans_vertices()[k] += delta.segment<3>(3 * nv + 3 * k);
    }
    e.spline().sign_align_rot_vertices();
    PoseRT& x = e.extrinsic();
    x.rotation = (x.rotation * Quat::exp_map(delta.segment<3>(ext_col))).normalized();
    x.translation += delta.segment<3>(ext_col + 3);
    double dt_new = e.dt() + delta(dt_col);
    dt_clamped = false;
    if (dt_new < e.dt_min() || dt_new > e.dt_max()) {
      dt_new = std::clamp(dt_new, e.dt_min(), e.dt_max());
      dt_clamped = true;
    }
    e.dt() = dt_new;
  };

  double cost = initial_cost;
  double lambda = 1e-6;
  bool any_accepted = false;
  std::string termination = "max iterations";
  bool converged = false;

  constexpr double kCostFloor = 1e-16;  // weighted squares; anything below is converged
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (cost < kCostFloor) {
      termination = "cost floor";
      converged = true;
      report.iterations = iter;
      break;
    }
    assemble();
    if (g.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
      termination = "gradient below tolerance";
      converged = true;
      report.iterations = iter;
      break;
    }

    bool accepted = false;
    double trial_cost = cost;
    for (int att = 0; att < 16; ++att) {
      Eigen::SparseMatrix<double> Hd = H;
      for (int d = 0; d < P; ++d) {
        const double diag = H.coeff(d, d);
        Hd.coeffRef(d, d) = diag + lambda * std::max(diag, 1e-12);
      }
      solver.factorize(Hd);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd delta = solver.solve(-g);
      Evaluator trial = ev;
      bool dt_clamped = false;
      apply_step(trial, delta, dt_clamped);
      trial_cost = trial.cost();
      if (trial_cost < cost) {
        ev = std::move(trial);
        if (dt_clamped) report.dt_hit_trust_region = true;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e14) break;
    }

    report.iterations = iter + 1;
    if (!accepted) {
      termination = "no cost-decreasing step found";
      break;
    }
    any_accepted = true;
    const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
    cost = trial_cost;
    if (rel < cfg.cost_rel_tol) {
      termination = "relative cost decrease below tolerance";
      converged = true;
      break;
    }
    if (cost < kCostFloor) {
      termination = "cost floor";
      converged = true;
      break;
    }
  }

  report.final_cost = cost;
  // failing to find any descent from a numerically-zero cost is convergence, not a stall
  if (!any_accepted && !converged && cost < kCostFloor) {
    converged = true;
    termination = "cost floor";
  }
  report.converged = converged;
  report.termination = termination;
  report.diverged = !any_accepted && !converged;

  if (report.diverged) {
    Evaluator initial(problem);
    report.final_cost = initial_cost;
    return RefinementResult{to_dual_quat(initial.extrinsic()), initial.dt(), initial.spline(),
                            report};
  }
  return RefinementResult{to_dual_quat(ev.extrinsic()), ev.dt(), ev.spline(), report};
}

}  // namespace stcal
