#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hwm/symbolic.hpp"
#include "hwm/trace.hpp"

namespace hwm::logic {

// One candidate (action, predicted successor) pair from the proposer role.
struct Proposal {
  GroundAction action;
  LogicalState predicted_next;
  double prior = 0.0;
};

struct TrajectoryScore {
  double goal_alignment = 0.0;
  int consistency_violations = 0;
  double total = 0.0;
};

struct PlannerConfig {
  int beam_width = 8;
  int max_depth = 16;
  double w_g = 1.0;
  double w_c = 1.0;
  double proposer_noise = 0.0;  // in [0, 1)
  uint64_t rng_seed = 0;
};

enum class ViolationKind { Inapplicable, WrongSuccessor };

struct Violation {
  size_t step = 0;
  ViolationKind kind = ViolationKind::Inapplicable;

  auto operator<=>(const Violation&) const = default;
};

// Search role. With proposer_noise == 0 each applicable ground action is
// proposed with its exact successor and uniform prior. With noise > 0,
// predicted successors may have one atom flipped and an inapplicable action
// may be injected, emulating an imperfect learned proposer. Pure function of
// (state, goal, domain, objects, config).
std::vector<Proposal> propose(const LogicalState& state, const AtomSet& goal,
                              const Domain& domain, const std::vector<std::string>& objects,
                              const PlannerConfig& config);

// Evaluation role: goal_alignment = |goal ∩ final| / |goal| (1 for empty
// goal), violations recomputed against the true transition function,
// total = w_g * alignment - w_c * violations.
TrajectoryScore evaluate(const PlanTrace& trace, const AtomSet& goal,
                         const PlannerConfig& config);

// Beam search over proposals, rescored by evaluate each depth. Proposals are
// verified and repaired against the true dynamics before expansion: a
// predicted successor that disagrees with apply is corrected when the action
// is applicable and the proposal is dropped otherwise, so returned traces
// always pass consistency_check and end in a goal-satisfying state. Throws
// Error(PlanNotFound) when the budget is exhausted.
PlanTrace plan(const Problem& problem, const Domain& domain, const PlannerConfig& config);

// Empty result iff the trace satisfies the step invariant everywhere.
std::vector<Violation> consistency_check(const PlanTrace& trace);

// Deterministic templated rendering of a verified trace: per step the
// action, deleted atoms, added atoms, and remaining unmet goal atoms.
std::string emit_cot_trace(const PlanTrace& trace, const AtomSet& goal);

}  // namespace hwm::logic
