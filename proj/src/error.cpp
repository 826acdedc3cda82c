#include "hsolve/error.hpp"

namespace hsolve {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::NotPositiveDefinite: return "not_positive_definite";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::IllConditioned: return "ill_conditioned";
    case ErrorKind::AsymmetricPattern: return "asymmetric_pattern";
    case ErrorKind::SingularDiagonal: return "singular_diagonal";
    case ErrorKind::LevelOverflow: return "level_overflow";
    case ErrorKind::ParseError: return "parse_error";
    case ErrorKind::UnsupportedField: return "unsupported_field";
    case ErrorKind::Io: return "io";
    case ErrorKind::DeadlockDetected: return "deadlock_detected";
    case ErrorKind::InsufficientSamples: return "insufficient_samples";
  }
  return "unknown";
}

}  // namespace hsolve
