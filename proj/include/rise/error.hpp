#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rise {

enum class ErrorCode {
  AllMissing,
  OutOfRange,
  SchemaError,
  DuplicateObservation,
  SeriesTooShort,
  NonConvergence,
  NonPositiveValue,
  InsufficientHistory,
  MalformedTree,
  BadProportions,
  SingularW,
  ShapeMismatch,
  EmptyTable,
  DegenerateDesign,
  ModelSetMismatch,
  InsufficientOverlap,
  NoKeywordPasses,
  ZeroIndex,
  NoFlightData,
  NoSignal,
  DegenerateX,
  MissingMonth,
  IllConditioned,
  NonPositiveTrend,
  NoBounds,
  ZeroScale,
  BadInterval,
  ZeroMeanActual,
  LengthMismatch,
  NoOverlap,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind of failure without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rise
