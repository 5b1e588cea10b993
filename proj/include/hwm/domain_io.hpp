#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hwm/symbolic.hpp"
#include "hwm/trace.hpp"

namespace hwm::io {

struct SourceSpan {
  int line = 1;    // 1-based
  int column = 1;  // 1-based
  int length = 0;
};

enum class ParseErrorKind {
  UnexpectedToken,
  UnknownPredicate,
  UnknownName,
  ArityMismatch,
  UnboundVariable,
  DuplicateName,
};

const char* to_string(ParseErrorKind kind);

struct ParseError {
  SourceSpan span;
  ParseErrorKind kind = ParseErrorKind::UnexpectedToken;
  std::string message;

  std::string format() const;  // "line:col: kind: message"
};

// Carries every error collected during a parse; what() reports the first.
class ParseFailure : public std::runtime_error {
 public:
  explicit ParseFailure(std::vector<ParseError> errors);
  const std::vector<ParseError>& errors() const { return errors_; }

 private:
  std::vector<ParseError> errors_;
};

// Grammar: s-expression PDDL subset. Domains use
//   define/domain/:predicates/:action/:parameters/:precondition/:effect/and/not
// and problems use define/problem/:domain/:objects/:init/:goal.
// `not` is legal only inside :effect. Identifiers are case-insensitive and
// normalized to lower case.
Domain parse_domain(const std::string& text);
Problem parse_problem(const std::string& text, const Domain& domain);

std::string serialize_domain(const Domain& domain);
std::string serialize_problem(const Problem& problem, const Domain& domain);

// One JSON object per line: a header, then alternating state records
// {state_atoms, step} and action records {action, bound_args, pre, add, del,
// step}. Round-trips bit-exactly through parse_trace.
std::string serialize_trace(const PlanTrace& trace);
PlanTrace parse_trace(const std::string& text);

}  // namespace hwm::io
