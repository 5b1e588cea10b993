#pragma once

#include <stdexcept>
#include <string>

namespace hwm {

enum class ErrorKind {
  ArityMismatch,
  Inapplicable,
  PlanNotFound,
  UnsupportedSchema,
  GenerationFailed,
  SubtaskUnreachable,
  DimensionMismatch,
  EmptySet,
  EmptyInput,
  NumericFailure,
  DegenerateLabels,
  ModelLoad,
  Io,
  Config,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::ArityMismatch: return "arity-mismatch";
    case ErrorKind::Inapplicable: return "inapplicable-action";
    case ErrorKind::PlanNotFound: return "plan-not-found";
    case ErrorKind::UnsupportedSchema: return "unsupported-schema";
    case ErrorKind::GenerationFailed: return "generation-failed";
    case ErrorKind::SubtaskUnreachable: return "subtask-unreachable";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::EmptySet: return "empty-set";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::NumericFailure: return "numeric-failure";
    case ErrorKind::DegenerateLabels: return "degenerate-labels";
    case ErrorKind::ModelLoad: return "model-load";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        message_(message) {}

  ErrorKind kind() const { return kind_; }
  const std::string& message() const { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace hwm
