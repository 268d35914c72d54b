#include "stcal/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace stcal {

Trajectory::Trajectory(std::vector<PoseSample> samples, std::string frame_label, double epoch)
    : samples_(std::move(samples)), frame_label_(std::move(frame_label)), epoch_(epoch) {
  if (samples_.empty()) throw EmptyTrajectory();
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].t > samples_[i - 1].t))
      throw NonMonotonicTime(static_cast<int>(i));
  }
}

double Trajectory::median_period() const {
  if (samples_.size() < 2) throw SpanTooShort("need at least 2 samples");
  std::vector<double> gaps(samples_.size() - 1);
  for (std::size_t i = 0; i + 1 < samples_.size(); ++i)
    gaps[i] = samples_[i + 1].t - samples_[i].t;
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  return gaps[gaps.size() / 2];
}

double Trajectory::native_rate() const { return 1.0 / median_period(); }

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
  } else {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, delim)) out.push_back(tok);
  }
  return out;
}

double parse_double(const std::string& s, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
    throw ParseError(line_no, "bad number '" + s + "'");
  return v;
}

}  // namespace

Trajectory parse_trajectory(std::istream& in, TrajectoryFormat format, std::string frame_label) {
  std::vector<PoseSample> samples;
  std::string line;
  int line_no = 0;
  double epoch = 0.0;
  bool have_epoch = false;
  long long epoch_ns = 0;
  double prev_t = 0.0;
  bool header_skipped = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // strip leading whitespace
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;

    double t_rel = 0.0;
    double qw, qx, qy, qz;
    Eigen::Vector3d p;

    if (format == TrajectoryFormat::tum) {
      const auto f = split_fields(line, ' ');
      if (f.size() != 8) throw ParseError(line_no, "expected 8 fields, got " + std::to_string(f.size()));
      const double t_abs = parse_double(f[0], line_no);
      p = {parse_double(f[1], line_no), parse_double(f[2], line_no), parse_double(f[3], line_no)};
      qx = parse_double(f[4], line_no);
      qy = parse_double(f[5], line_no);
      qz = parse_double(f[6], line_no);
      qw = parse_double(f[7], line_no);
      if (!have_epoch) {
        epoch = t_abs;
        have_epoch = true;
      }
      t_rel = t_abs - epoch;
    } else {
      if (!header_skipped) {
        header_skipped = true;
        // EuRoC data.csv header usually starts with '#' (already skipped); tolerate a bare one
        if (!std::isdigit(static_cast<unsigned char>(line[first]))) continue;
      }
      const auto f = split_fields(line, ',');
      if (f.size() < 8) throw ParseError(line_no, "expected >= 8 fields, got " + std::to_string(f.size()));
      char* end = nullptr;
      const long long ns = std::strtoll(f[0].c_str(), &end, 10);
      if (end == f[0].c_str()) throw ParseError(line_no, "bad timestamp '" + f[0] + "'");
      if (!have_epoch) {
        epoch_ns = ns;
        // exact integer split keeps nanosecond resolution through the double conversion
        epoch = static_cast<double>(epoch_ns / 1000000000LL) +
                static_cast<double>(epoch_ns % 1000000000LL) * 1e-9;
        have_epoch = true;
      }
      t_rel = static_cast<double>(ns - epoch_ns) * 1e-9;
      p = {parse_double(f[1], line_no), parse_double(f[2], line_no), parse_double(f[3], line_no)};
      qw = parse_double(f[4], line_no);
      qx = parse_double(f[5], line_no);
      qy = parse_double(f[6], line_no);
      qz = parse_double(f[7], line_no);
    }

    Quat q(qw, qx, qy, qz);
    const double n = q.norm();
    if (n < 1e-9) throw ParseError(line_no, "zero-norm quaternion");
    q = q * (1.0 / n);

    if (!samples.empty() && !(t_rel > prev_t)) throw NonMonotonicTime(line_no);
    prev_t = t_rel;
    samples.push_back({t_rel, DualQuat::from_rt(q, p)});
  }

  if (samples.empty()) throw EmptyTrajectory();
  return Trajectory(std::move(samples), std::move(frame_label), epoch);
}

Trajectory load_trajectory(const std::string& path, TrajectoryFormat format,
                           std::string frame_label) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory file: " + path);
  return parse_trajectory(in, format, std::move(frame_label));
}

void write_tum(std::ostream& out, const Trajectory& traj) {
  if (!traj.frame_label().empty()) out << "# frame: " << traj.frame_label() << "\n";
  char buf[512];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj[i];
    const Quat q = s.pose.rotation();
    const Eigen::Vector3d p = s.pose.translation();
    std::snprintf(buf, sizeof(buf),
                  "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  traj.epoch() + s.t, p.x(), p.y(), p.z(), q.x, q.y, q.z, q.w);
    out << buf;
  }
}

void save_tum(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  write_tum(out, traj);
}

namespace {

// Shortest-arc spherical interpolation between unit quaternions.
Quat slerp(const Quat& a, Quat b, double u) {
  double d = a.dot(b);
  if (d < 0.0) {
    b = -b;
    d = -d;
  }
  if (d > 1.0 - 1e-12) {
    // nearly parallel: nlerp is exact to first order and avoids 0/0
    return (a * (1.0 - u) + b * u).normalized();
  }
  const double theta = std::acos(std::min(d, 1.0));
  const double s = std::sin(theta);
  return (a * (std::sin((1.0 - u) * theta) / s) + b * (std::sin(u * theta) / s)).normalized();
}

}  // namespace

DualQuat interpolate_at(const Trajectory& traj, double t_abs) {
  const double t = t_abs - traj.epoch();
  const auto& s = traj.samples();
  if (t < s.front().t - 1e-9 || t > s.back().t + 1e-9)
    throw OutOfDomain("interpolation time outside the trajectory span");
  auto it = std::lower_bound(s.begin(), s.end(), t,
                             [](const PoseSample& ps, double v) { return ps.t < v; });
  if (it == s.end()) --it;
  if (it != s.begin() && it->t > t) --it;
  const std::size_t k = static_cast<std::size_t>(it - s.begin());
  if (k + 1 >= s.size()) return s.back().pose;
  const auto& a = s[k];
  const auto& b = s[k + 1];
  const double u = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
  if (u == 0.0) return a.pose;
  if (u == 1.0) return b.pose;
  const Quat r = slerp(a.pose.rotation(), b.pose.rotation(), u);
  const Eigen::Vector3d p = (1.0 - u) * a.pose.translation() + u * b.pose.translation();
  return DualQuat::from_rt(r, p);
}

Trajectory resample_on_grid(const Trajectory& traj, double t0_abs, double rate,
                            std::size_t count, std::vector<char>* gap_flags) {
  if (rate <= 0.0) throw Error("resample rate must be positive");
  if (count < 2) throw SpanTooShort("resample grid needs at least 2 points");
  const double gap_limit = 5.0 * traj.median_period();
  const auto& s = traj.samples();

  std::vector<PoseSample> out;
  out.reserve(count);
  if (gap_flags) gap_flags->assign(count, 0);
  const double epoch = traj.epoch();
  std::size_t k = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double t_abs = t0_abs + static_cast<double>(i) / rate;
    const double t = t_abs - epoch;
    if (t < s.front().t - 1e-9 || t > s.back().t + 1e-9)
      throw OutOfDomain("resample grid leaves the trajectory span");
    while (k + 2 < s.size() && s[k + 1].t <= t) ++k;
    if (gap_flags && s[k + 1].t - s[k].t > gap_limit) (*gap_flags)[i] = 1;
    out.push_back({t_abs - t0_abs, interpolate_at(traj, t_abs)});
  }
  return Trajectory(std::move(out), traj.frame_label(), t0_abs);
}

Trajectory resample(const Trajectory& traj, double rate) {
  if (rate <= 0.0) throw Error("resample rate must be positive");
  const double span = traj.duration();
  if (!(span > 2.0 / rate)) throw SpanTooShort("trajectory span must exceed 2/rate");
  const std::size_t count = static_cast<std::size_t>(std::floor(span * rate + 1e-9)) + 1;
  return resample_on_grid(traj, traj.abs_start(), rate, count);
}

Trajectory shift_time(const Trajectory& traj, double dt) {
  return Trajectory(std::vector<PoseSample>(traj.samples()), traj.frame_label(),
                    traj.epoch() + dt);
}

}  // namespace stcal
