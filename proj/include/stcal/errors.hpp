#pragma once

#include <stdexcept>
#include <string>

namespace stcal {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// trajectory_io
class ParseError : public Error {
public:
  ParseError(int line, const std::string& what)
      : Error("parse error at line " + std::to_string(line) + ": " + what), line_no(line) {}
  int line_no;
};

class NonMonotonicTime : public Error {
public:
  explicit NonMonotonicTime(int line)
      : Error("non-monotonic timestamp at line " + std::to_string(line)), line_no(line) {}
  int line_no;
};

class EmptyTrajectory : public Error {
public:
  EmptyTrajectory() : Error("trajectory contains no samples") {}
};

class SpanTooShort : public Error {
public:
  using Error::Error;
};

class NonUnitRotation : public Error {
public:
  using Error::Error;
};

class InvalidDualQuat : public Error {
public:
  using Error::Error;
};

// time_alignment
class RateMismatch : public Error {
public:
  using Error::Error;
};

class SignalTooShort : public Error {
public:
  using Error::Error;
};

class PeakAtBoundary : public Error {
public:
  using Error::Error;
};

class InsufficientOverlap : public Error {
public:
  using Error::Error;
};

class NoMotion : public Error {
public:
  using Error::Error;
};

// linear_calibration
class NoPairs : public Error {
public:
  using Error::Error;
};

class DegeneratePair : public Error {
public:
  using Error::Error;
};

class IllConditioned : public Error {
public:
  using Error::Error;
};

class QuadraticDegenerate : public Error {
public:
  using Error::Error;
};

class NoConsensus : public Error {
public:
  using Error::Error;
};

// batch_refinement
class OutOfDomain : public Error {
public:
  using Error::Error;
};

// evaluation_metrics
class DegenerateGeometry : public Error {
public:
  using Error::Error;
};

class NoMatches : public Error {
public:
  using Error::Error;
};

// synthetic_generator
class InsufficientRotation : public Error {
public:
  using Error::Error;
};

}  // namespace stcal
