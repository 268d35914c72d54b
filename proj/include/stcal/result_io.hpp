#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "stcal/linear_calibration.hpp"

namespace stcal {

// Calibration result file: plain structured text, one key per line, with the extrinsic
// on a TUM-style "tx ty tz qx qy qz qw" line. Unknown keys round-trip untouched.
struct ResultFile {
  double dt = 0.0;
  DualQuat extrinsic;
  double quality = 0.0;
  int inliers = 0;
  int pairs = 0;
  std::map<std::string, std::string> extra;

  static ResultFile from_result(const CalibrationResult& r);
  CalibrationResult to_result() const;
};

void write_result(std::ostream& out, const ResultFile& r);
void save_result(const std::string& path, const ResultFile& r);
ResultFile parse_result(std::istream& in);
ResultFile load_result(const std::string& path);

}  // namespace stcal
