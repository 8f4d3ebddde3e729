#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace calps {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  EmptyDesign,
  DuplicateTerm,
  UnknownColumn,
  DomainError,
  PreconditionViolated,
  DegenerateTreatment,
  DegenerateWeights,
  ZeroVariance,
  ArmTooSmall,
  NoViableLambda,
  Io,
  Parse,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code. All library failures that are
/// not reported through a status field are thrown as this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace calps
