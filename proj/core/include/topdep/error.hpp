#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace topdep {

enum class ErrorCode {
  UnbalancedBrackets,
  TokenMismatch,
  IllegalNesting,
  BadLabel,
  BadFormat,
  EmptyCorpus,
  UnknownSymbol,
  ReplicaBudgetExceeded,
  InvalidParse,
  UnanchoredSubtree,
  NonProjective,
  InfeasibleGraph,
  NoRootCandidate,
  TooLarge,
  MaskMismatch,
  NonFiniteLoss,
  BadPercentages,
  VocabMismatch,
  Io,
};

/// Broad failure class; the CLI maps it onto its exit code.
enum class ErrorClass { Usage, Data, Numeric };

std::string_view to_string(ErrorCode code);
ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace topdep
