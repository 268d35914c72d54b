#include "stcal/time_alignment.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "stcal/errors.hpp"

namespace stcal {

AngularSpeedSignal angular_speed(const Trajectory& traj, double rate) {
  const Trajectory grid = resample(traj, rate);
  AngularSpeedSignal sig;
  sig.rate = rate;
  sig.t0 = grid.abs_start();
  sig.values.resize(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const DualQuat rel = grid[i].pose.inverse() * grid[i + 1].pose;
    sig.values[i] = rotation_angle(rel) * rate;
  }
  return sig;
}

Correlation cross_correlate(const AngularSpeedSignal& a, const AngularSpeedSignal& b) {
  if (std::abs(a.rate - b.rate) > 1e-9 * std::max(a.rate, b.rate))
    throw RateMismatch("signals must share one sample rate");
  const int na = static_cast<int>(a.values.size());
  const int nb = static_cast<int>(b.values.size());
  if (na < 8 || nb < 8) throw SignalTooShort("need at least 8 samples per signal");

  const int min_overlap =
      std::max(8, static_cast<int>(std::ceil(0.1 * std::min(na, nb))));

  // Global mean removal only (recorded in diagnostics; the per-lag normalization below
  // already bounds values to [-1, 1] by Cauchy-Schwarz).
  std::vector<double> am(a.values), bm(b.values);
  const double mean_a = std::accumulate(am.begin(), am.end(), 0.0) / na;
  const double mean_b = std::accumulate(bm.begin(), bm.end(), 0.0) / nb;
  for (double& v : am) v -= mean_a;
  for (double& v : bm) v -= mean_b;

  // Raw sliding dot products via FFT with zero padding.
  int L = 1;
  while (L < na + nb) L <<= 1;
  std::vector<double> pa(L, 0.0), pb(L, 0.0);
  std::copy(am.begin(), am.end(), pa.begin());
  std::copy(bm.begin(), bm.end(), pb.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (int i = 0; i < L; ++i) fa[i] = std::conj(fa[i]) * fb[i];
  std::vector<double> raw;
  fft.inv(raw, fa);
  // raw[l mod L] = sum_i am[i] * bm[i + l]; positive lag means b lags (is delayed vs) a

  // Prefix sums of squares for exact per-lag segment norms.
  std::vector<double> ca(na + 1, 0.0), cb(nb + 1, 0.0);
  for (int i = 0; i < na; ++i) ca[i + 1] = ca[i] + am[i] * am[i];
  for (int i = 0; i < nb; ++i) cb[i + 1] = cb[i] + bm[i] * bm[i];

  Correlation out;
  out.first_lag = -(na - min_overlap);
  const int last_lag = nb - min_overlap;
  out.values.reserve(last_lag - out.first_lag + 1);
  for (int lag = out.first_lag; lag <= last_lag; ++lag) {
    const int ia_lo = std::max(0, -lag);
    const int ia_hi = std::min(na - 1, nb - 1 - lag);  // inclusive, pairs (i, i + lag)
    const double ea = ca[ia_hi + 1] - ca[ia_lo];
    const double eb = cb[ia_hi + lag + 1] - cb[ia_lo + lag];
    const double num = raw[(lag % L + L) % L];
    const double den = std::sqrt(ea * eb);
    out.values.push_back(den > 1e-300 ? num / den : 0.0);
  }
  return out;
}

PeakRefinement refine_peak(const std::vector<double>& corr, int peak_index) {
  if (peak_index < 1 || peak_index + 1 >= static_cast<int>(corr.size()))
    throw PeakAtBoundary("correlation peak at the edge of the searched lag range");
  const double cm = corr[peak_index - 1];
  const double c0 = corr[peak_index];
  const double cp = corr[peak_index + 1];
  const double denom = cm - 2.0 * c0 + cp;
  PeakRefinement r;
  if (denom >= -1e-12) {  // not concave; keep the integer peak
    r.index = peak_index;
    r.curvature_ok = false;
    return r;
  }
  const double delta = std::clamp(0.5 * (cm - cp) / denom, -0.5, 0.5);
  r.index = peak_index + delta;
  r.curvature_ok = true;
  return r;
}

namespace {

TimeOffsetEstimate estimate_impl(const Trajectory& hand, const Trajectory& eye,
                                 const AlignConfig& cfg, bool refine) {
  const double overlap =
      std::min(hand.abs_end(), eye.abs_end()) - std::max(hand.abs_start(), eye.abs_start());
  if (overlap < cfg.min_overlap)
    throw InsufficientOverlap("stamped trajectory overlap below the configured minimum");

  double rate = cfg.correlation_rate;
  if (rate <= 0.0) rate = std::min(hand.native_rate(), eye.native_rate());

  const AngularSpeedSignal sh = angular_speed(hand, rate);
  const AngularSpeedSignal se = angular_speed(eye, rate);

  auto variance = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / v.size();
  };
  if (variance(sh.values) < 1e-8 && variance(se.values) < 1e-8)
    throw NoMotion("angular speed variance below 1e-8 on both trajectories");

  const Correlation corr = cross_correlate(sh, se);
  const auto it = std::max_element(corr.values.begin(), corr.values.end());
  const int peak = static_cast<int>(it - corr.values.begin());

  TimeOffsetEstimate est;
  est.peak_correlation = *it;
  double index = peak;
  if (refine) {
    try {
      const PeakRefinement pr = refine_peak(corr.values, peak);
      index = pr.index;
      est.curvature_ok = pr.curvature_ok;
    } catch (const PeakAtBoundary&) {
      // cannot widen past the full overlap; fall back to the integer peak, unreliable
      est.curvature_ok = false;
    }
  }
  const double lag = corr.first_lag + index;
  // positive lag: the eye signal is delayed relative to the hand signal; the epochs
  // carry the rest of the offset (convention t_hand = t_eye + dt)
  est.dt = sh.t0 - se.t0 - lag / rate;
  est.reliable = est.curvature_ok && est.peak_correlation >= cfg.reliability_threshold;
  return est;
}

}  // namespace

TimeOffsetEstimate estimate_time_offset(const Trajectory& hand, const Trajectory& eye,
                                        const AlignConfig& cfg) {
  return estimate_impl(hand, eye, cfg, true);
}

TimeOffsetEstimate estimate_time_offset_unrefined(const Trajectory& hand, const Trajectory& eye,
                                                  const AlignConfig& cfg) {
  TimeOffsetEstimate est = estimate_impl(hand, eye, cfg, false);
  est.curvature_ok = false;
  est.reliable = est.peak_correlation >= cfg.reliability_threshold;
  return est;
}

}  // namespace stcal
