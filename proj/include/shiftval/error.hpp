#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shiftval {

enum class ErrorCode {
  EmptyStratum,
  MissingnessMismatch,
  DimensionMismatch,
  InvalidConfig,
  InvalidRho,
  StratumTooSmall,
  Separation,
  RankDeficient,
  NoObservedOutcomes,
  SolveFailure,
  InfeasibleBalance,
  MissingField,
  DegenerateDenominator,
  MissingStratum,
  InvalidLevel,
  EmptyCalibration,
  MissingTreatmentsOutcomes,
  VariantMismatch,
  ParseError,
  IoError,
};

std::string_view error_name(ErrorCode code);

// All library failures surface as this exception; the code names the failure
// mode so callers (and the CLI) can report it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace shiftval
