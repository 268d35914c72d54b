#include "stcal/result_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "stcal/errors.hpp"

namespace stcal {

ResultFile ResultFile::from_result(const CalibrationResult& r) {
  ResultFile f;
  f.dt = r.dt;
  f.extrinsic = r.extrinsic;
  f.quality = r.quality;
  f.inliers = r.inlier_count;
  f.pairs = r.pair_count;
  return f;
}

CalibrationResult ResultFile::to_result() const {
  CalibrationResult r;
  r.dt = dt;
  r.extrinsic = extrinsic;
  r.quality = quality;
  r.inlier_count = inliers;
  r.pair_count = pairs;
  return r;
}

void write_result(std::ostream& out, const ResultFile& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "dt %.17g\n", r.dt);
  out << buf;
  const Quat q = r.extrinsic.rotation();
  const Eigen::Vector3d t = r.extrinsic.translation();
  std::snprintf(buf, sizeof(buf), "extrinsic %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                t.x(), t.y(), t.z(), q.x, q.y, q.z, q.w);
  out << buf;
  std::snprintf(buf, sizeof(buf), "quality %.17g\n", r.quality);
  out << buf;
  out << "inliers " << r.inliers << "\n";
  out << "pairs " << r.pairs << "\n";
  for (const auto& [k, v] : r.extra) out << k << " " << v << "\n";
}

void save_result(const std::string& path, const ResultFile& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open result file for writing: " + path);
  write_result(out, r);
}

ResultFile parse_result(std::istream& in) {
  ResultFile r;
  std::string line;
  bool have_dt = false, have_x = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "dt") {
      ss >> r.dt;
      have_dt = true;
    } else if (key == "extrinsic") {
      double tx, ty, tz, qx, qy, qz, qw;
      if (!(ss >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
        throw ParseError(line_no, "extrinsic line needs 7 numbers");
      r.extrinsic = DualQuat::from_rt(Quat(qw, qx, qy, qz).normalized(),
                                      Eigen::Vector3d(tx, ty, tz));
      have_x = true;
    } else if (key == "quality") {
      ss >> r.quality;
    } else if (key == "inliers") {
      ss >> r.inliers;
    } else if (key == "pairs") {
      ss >> r.pairs;
    } else {
      std::string rest;
      std::getline(ss, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      r.extra[key] = rest;
    }
    if (ss.fail()) throw ParseError(line_no, "malformed value for key '" + key + "'");
  }
  if (!have_dt || !have_x) throw Error("result file lacks dt or extrinsic");
  return r;
}

ResultFile load_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open result file: " + path);
  return parse_result(in);
}

}  // namespace stcal
