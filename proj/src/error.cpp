#include "synthctl/error.hpp"

namespace synthctl {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateObservation: return "DuplicateObservation";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::EmptyPanel: return "EmptyPanel";
    case ErrorCode::UnknownUnit: return "UnknownUnit";
    case ErrorCode::UnknownOutcome: return "UnknownOutcome";
    case ErrorCode::UnknownCovariate: return "UnknownCovariate";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::MissingAttribute: return "MissingAttribute";
    case ErrorCode::AllMissing: return "AllMissing";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::NoDonors: return "NoDonors";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::UnderdeterminedSystem: return "UnderdeterminedSystem";
    case ErrorCode::MissingOutcome: return "MissingOutcome";
    case ErrorCode::EmptyPrePeriod: return "EmptyPrePeriod";
    case ErrorCode::ZeroPreFit: return "ZeroPreFit";
    case ErrorCode::InferenceImpossible: return "InferenceImpossible";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace synthctl
