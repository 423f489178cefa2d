#pragma once

#include <stdexcept>
#include <string>

namespace tuckeropt {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, modes or indices that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (binary tensor, COO text, checkpoint, bundle).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input contained NaN or Inf where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// A core unfolding lost full row rank where a pseudo-inverse is needed.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// Oracle requested on an instance too large for brute force.
class InstanceTooLargeError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace detail
}  // namespace tuckeropt
