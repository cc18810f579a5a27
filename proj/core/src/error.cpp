#include "topdep/error.hpp"

namespace topdep {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorCode::TokenMismatch: return "TokenMismatch";
    case ErrorCode::IllegalNesting: return "IllegalNesting";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::ReplicaBudgetExceeded: return "ReplicaBudgetExceeded";
    case ErrorCode::InvalidParse: return "InvalidParse";
    case ErrorCode::UnanchoredSubtree: return "UnanchoredSubtree";
    case ErrorCode::NonProjective: return "NonProjective";
    case ErrorCode::InfeasibleGraph: return "InfeasibleGraph";
    case ErrorCode::NoRootCandidate: return "NoRootCandidate";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::MaskMismatch: return "MaskMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadPercentages: return "BadPercentages";
    case ErrorCode::VocabMismatch: return "VocabMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadPercentages:
      return ErrorClass::Usage;
    case ErrorCode::NonFiniteLoss:
      return ErrorClass::Numeric;
    default:
      return ErrorClass::Data;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace topdep
