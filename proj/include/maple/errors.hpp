#pragma once

#include <stdexcept>
#include <string>

namespace maple {

// Every failure the library raises carries one of these codes. The CLI maps
// the broad category to its exit code (validation=1, provider=2, parse=3).
enum class ErrorCode {
  Ingestion,
  Validation,
  Config,
  InsufficientData,
  DegenerateWeights,
  Pairing,
  Alignment,
  Aggregation,
  Report,
  Io,
  Numeric,

  Gateway,
  ReplayMiss,
  EmptyCompletion,
  ProviderContract,
  Generation,
  Scoring,

  Extraction,
  ReflectionParse,
  JudgeParse,
  UnknownLabel,
};

enum class ErrorCategory : int {
  Validation = 1,
  Provider = 2,
  Parse = 3,
};

constexpr ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Gateway:
    case ErrorCode::ReplayMiss:
    case ErrorCode::EmptyCompletion:
    case ErrorCode::ProviderContract:
    case ErrorCode::Generation:
    case ErrorCode::Scoring:
      return ErrorCategory::Provider;
    case ErrorCode::Extraction:
    case ErrorCode::ReflectionParse:
    case ErrorCode::JudgeParse:
    case ErrorCode::UnknownLabel:
      return ErrorCategory::Parse;
    default:
      return ErrorCategory::Validation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  ErrorCategory category() const { return category_of(code_); }
  int exit_code() const { return static_cast<int>(category()); }

 private:
  ErrorCode code_;
};

}  // namespace maple
