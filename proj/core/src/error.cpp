#include "calps/error.hpp"

namespace calps {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyDesign: return "EmptyDesign";
    case ErrorCode::DuplicateTerm: return "DuplicateTerm";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::DegenerateTreatment: return "DegenerateTreatment";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::ArmTooSmall: return "ArmTooSmall";
    case ErrorCode::NoViableLambda: return "NoViableLambda";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace calps
