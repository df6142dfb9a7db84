#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/LU>

namespace divfree {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input (mesh files, config values, unsupported degrees).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometry: zero or negative cell areas, non-manifold facets.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A linear system could not be factorized or solved.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace divfree
