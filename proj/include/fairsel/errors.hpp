#pragma once

#include <stdexcept>
#include <string>

namespace fairsel {

// Base type for all library failures so callers can catch one family.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed schema: duplicate names, unknown variables, bad roles,
// missing columns.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Caller passed inconsistent arguments (overlapping variable sets,
// out-of-range values, unusable options).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Conditioning event has zero probability.
class DegenerateEvidenceError : public Error {
 public:
  using Error::Error;
};

// A guard on problem size was exceeded.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Input text could not be parsed (CSV, JSON, numbers).
class ParseError : public Error {
 public:
  using Error::Error;
};

// A categorical cell held a value that is not a declared level.
class LevelError : public Error {
 public:
  using Error::Error;
};

// A computed quantity violated a mathematical bound by more than the
// clamping threshold (e.g. mutual information below -1e-12).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A lookup table required by an exact computation is incomplete.
class TableError : public Error {
 public:
  using Error::Error;
};

// Metric requested on inputs it is not defined for.
class UnsupportedMetricError : public Error {
 public:
  using Error::Error;
};

// Iterative solver ran out of its iteration budget. Carries the best
// feasible value seen and the residual optimality gap bound.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double best_value, double objective_gap)
      : Error(msg), best_value_(best_value), objective_gap_(objective_gap) {}

  double best_value() const { return best_value_; }
  double objective_gap() const { return objective_gap_; }

 private:
  double best_value_;
  double objective_gap_;
};

}  // namespace fairsel
