#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace laker {

enum class ErrorCode {
  NotPositiveDefinite,
  NoConvergence,
  DimensionMismatch,
  InvalidConfig,
  InvalidInput,
  DegenerateDirection,
  IndefinitePreconditioner,
  BreakdownZeroCurvature,
  ZeroDenominator,
  EmptyRows,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (the sweep driver in particular) can record it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace laker
