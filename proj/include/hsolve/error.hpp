#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hsolve {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  NotPositiveDefinite,
  Singular,
  IllConditioned,
  AsymmetricPattern,
  SingularDiagonal,
  LevelOverflow,
  ParseError,
  UnsupportedField,
  Io,
  DeadlockDetected,
  InsufficientSamples,
};

const char* to_string(ErrorKind kind);

/// Library-wide exception. `index()` carries the pivot, column, cluster or
/// line number relevant to the failure (-1 when not applicable).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::int64_t index = -1)
      : std::runtime_error(what), kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::int64_t index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::int64_t index_;
};

}  // namespace hsolve
