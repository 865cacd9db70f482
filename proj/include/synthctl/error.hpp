#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace synthctl {

enum class ErrorCode {
  InvalidArgument,
  IoError,
  SchemaMismatch,
  MalformedRow,
  DuplicateObservation,
  InvalidValue,
  EmptyPanel,
  UnknownUnit,
  UnknownOutcome,
  UnknownCovariate,
  UnknownAttribute,
  MissingAttribute,
  AllMissing,
  InvalidWindow,
  NoDonors,
  NonFiniteInput,
  UnderdeterminedSystem,
  MissingOutcome,
  EmptyPrePeriod,
  ZeroPreFit,
  InferenceImpossible,
  EmptyWindow,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Domain error carrying a machine-readable code. Every failure that the
/// library reports to callers goes through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace synthctl
