#include "shiftval/error.hpp"

namespace shiftval {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyStratum: return "EmptyStratum";
    case ErrorCode::MissingnessMismatch: return "MissingnessMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidRho: return "InvalidRho";
    case ErrorCode::StratumTooSmall: return "StratumTooSmall";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoObservedOutcomes: return "NoObservedOutcomes";
    case ErrorCode::SolveFailure: return "SolveFailure";
    case ErrorCode::InfeasibleBalance: return "InfeasibleBalance";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::MissingStratum: return "MissingStratum";
    case ErrorCode::InvalidLevel: return "InvalidLevel";
    case ErrorCode::EmptyCalibration: return "EmptyCalibration";
    case ErrorCode::MissingTreatmentsOutcomes: return "MissingTreatmentsOutcomes";
    case ErrorCode::VariantMismatch: return "VariantMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace shiftval
