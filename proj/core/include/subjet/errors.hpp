#pragma once

#include <stdexcept>
#include <string>

namespace subjet {

// Base class for all library failures. Every subclass maps to one CLI exit
// code; see tools/subjet.cpp.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid gas model input (non-positive profile sample, pressure at or below
// the sonic admissibility threshold, malformed profile file).
struct ModelError : Error {
  using Error::Error;
};

// Numeric precondition violated (argument outside a documented domain,
// negative radicand, truncation length out of range).
struct DomainError : Error {
  using Error::Error;
};

// Momentum squared at or above the sonic value where the subsonic branch is
// required. Carries the offending sample.
struct SonicError : Error {
  SonicError(const std::string& what, double t_, double z_)
      : Error(what), t(t_), z(z_) {}
  double t;
  double z;
};

// Nozzle or mesh construction failure (wall not invertible, mu beyond the
// sampled wall range, degenerate cells).
struct GeometryError : Error {
  using Error::Error;
};

// Free-boundary extraction failure (multiple level crossings on one mesh
// line, empty coincidence set).
struct ExtractionError : Error {
  using Error::Error;
};

// Momentum parameter fit failure (bracket without sign change after
// expansion, probe limit exhausted without meeting tolerance).
struct FitError : Error {
  using Error::Error;
};

// Optimizer failure (line search stalled, iteration cap hit while the
// gradient is still above threshold).
struct SolveError : Error {
  using Error::Error;
};

// Config file rejection with source position.
struct ConfigError : Error {
  ConfigError(const std::string& what, int line_ = 0, int col_ = 0)
      : Error(what), line(line_), col(col_) {}
  int line;
  int col;
};

// Filesystem failure; outputs are written atomically so a failed write
// leaves no partial file behind.
struct IoError : Error {
  using Error::Error;
};

// Internal consistency violation (corrupt table state). Always a bug.
struct InternalError : Error {
  using Error::Error;
};

}  // namespace subjet
