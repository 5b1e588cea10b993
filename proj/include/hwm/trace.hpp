#pragma once

#include <vector>

#include "hwm/symbolic.hpp"

namespace hwm {

// Alternating action/state sequence: states[0..M], actions[1..M] with
// actions.size() == states.size() - 1. A verified trace satisfies
// states[m+1] == apply(actions[m], states[m]) for every m; `unverified`
// marks raw proposer output that has not been checked or repaired yet.
struct PlanTrace {
  std::vector<LogicalState> states;
  std::vector<GroundAction> actions;
  bool unverified = false;

  auto operator<=>(const PlanTrace&) const = default;

  size_t length() const { return actions.size(); }
  const LogicalState& final_state() const { return states.back(); }
};

}  // namespace hwm
