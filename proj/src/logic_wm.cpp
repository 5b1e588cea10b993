#include "hwm/logic_wm.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "hwm/error.hpp"
#include "hwm/rng.hpp"

namespace hwm::logic {

namespace {

// All (schema x binding) ground actions in canonical order.
std::vector<GroundAction> enumerate_ground_actions(const Domain& domain,
                                                   const std::vector<std::string>& objects) {
  std::vector<std::string> objs = objects;
  std::sort(objs.begin(), objs.end());
  std::vector<const ActionSchema*> schemas;
  for (const auto& s : domain.schemas) schemas.push_back(&s);
  std::sort(schemas.begin(), schemas.end(),
            [](const ActionSchema* a, const ActionSchema* b) { return a->name < b->name; });

  std::vector<GroundAction> out;
  for (const ActionSchema* schema : schemas) {
    const size_t j = schema->params.size();
    if (j > 0 && objs.empty()) continue;
    std::vector<size_t> idx(j, 0);
    while (true) {
      std::vector<std::string> binding;
      binding.reserve(j);
      for (size_t i = 0; i < j; ++i) binding.push_back(objs[idx[i]]);
      out.push_back(ground_schema(*schema, binding));
      if (j == 0) break;
      size_t pos = j;
      while (pos > 0) {
        if (++idx[pos - 1] < objs.size()) break;
        idx[pos - 1] = 0;
        --pos;
      }
      if (pos == 0) break;
    }
  }
  return out;
}

// Flip one atom (remove if present, insert if absent).
LogicalState flip_atom(const LogicalState& state, const GroundAtom& atom) {
  AtomSet atoms = state.atoms();
  auto it = std::lower_bound(atoms.begin(), atoms.end(), atom);
  if (it != atoms.end() && *it == atom) {
    atoms.erase(it);
  } else {
    atoms.insert(it, atom);
  }
  return LogicalState(std::move(atoms));
}

LogicalState naive_apply(const GroundAction& action, const LogicalState& state) {
  AtomSet removed;
  std::set_difference(state.atoms().begin(), state.atoms().end(), action.del.begin(),
                      action.del.end(), std::back_inserter(removed));
  AtomSet merged;
  std::set_union(removed.begin(), removed.end(), action.add.begin(), action.add.end(),
                 std::back_inserter(merged));
  return LogicalState(std::move(merged));
}

}  // namespace

std::vector<Proposal> propose(const LogicalState& state, const AtomSet& goal,
                              const Domain& domain, const std::vector<std::string>& objects,
                              const PlannerConfig& config) {
  (void)goal;  // the heuristic proposer enumerates independent of the goal
  std::vector<Proposal> proposals;
  for (auto& action : applicable_actions(state, domain, objects)) {
    Proposal p;
    p.predicted_next = apply(action, state);
    p.action = std::move(action);
    proposals.push_back(std::move(p));
  }

  if (config.proposer_noise > 0.0) {
    Rng rng(mix_seed(config.rng_seed, state.key()));
    AtomSet universe = all_ground_atoms(domain, objects);
    for (auto& p : proposals) {
      if (!universe.empty() && rng.uniform() < config.proposer_noise) {
        p.predicted_next = flip_atom(p.predicted_next, universe[rng.below(universe.size())]);
      }
    }
    if (rng.uniform() < config.proposer_noise) {
      std::vector<GroundAction> inapplicable;
      for (auto& a : enumerate_ground_actions(domain, objects)) {
        if (!is_applicable(a, state)) inapplicable.push_back(std::move(a));
      }
      if (!inapplicable.empty()) {
        Proposal p;
        p.action = inapplicable[rng.below(inapplicable.size())];
        p.predicted_next = naive_apply(p.action, state);
        proposals.push_back(std::move(p));
      }
    }
  }

  const double prior = proposals.empty() ? 0.0 : 1.0 / static_cast<double>(proposals.size());
  for (auto& p : proposals) p.prior = prior;
  return proposals;
}

std::vector<Violation> consistency_check(const PlanTrace& trace) {
  std::vector<Violation> violations;
  for (size_t m = 0; m + 1 < trace.states.size(); ++m) {
    const GroundAction& action = trace.actions[m];
    if (!is_applicable(action, trace.states[m])) {
      violations.push_back({m, ViolationKind::Inapplicable});
      continue;
    }
    if (apply(action, trace.states[m]) != trace.states[m + 1]) {
      violations.push_back({m, ViolationKind::WrongSuccessor});
    }
  }
  return violations;
}

TrajectoryScore evaluate(const PlanTrace& trace, const AtomSet& goal,
                         const PlannerConfig& config) {
  if (trace.states.empty()) {
    throw Error(ErrorKind::EmptyInput, "evaluate requires at least one state");
  }
  TrajectoryScore score;
  if (goal.empty()) {
    score.goal_alignment = 1.0;
  } else {
    size_t hit = 0;
    for (const auto& atom : goal) {
      if (trace.final_state().contains(atom)) ++hit;
    }
    score.goal_alignment = static_cast<double>(hit) / static_cast<double>(goal.size());
  }
  score.consistency_violations = static_cast<int>(consistency_check(trace).size());
  score.total = config.w_g * score.goal_alignment - config.w_c * score.consistency_violations;
  return score;
}

namespace {

struct Candidate {
  PlanTrace trace;
  TrajectoryScore score;
};

// Repair policy: a predicted successor that disagrees with the true
// transition is corrected when the action is applicable; inapplicable
// proposals are dropped. Treats the symbolic core as ground truth.
bool repair_proposal(Proposal& p, const LogicalState& state) {
  if (!is_applicable(p.action, state)) return false;
  p.predicted_next = apply(p.action, state);
  return true;
}

// Descending total, then shorter trace, then lexicographic action order.
bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.score.total != b.score.total) return a.score.total > b.score.total;
  if (a.trace.length() != b.trace.length()) return a.trace.length() < b.trace.length();
  const size_t n = std::min(a.trace.actions.size(), b.trace.actions.size());
  for (size_t i = 0; i < n; ++i) {
    const GroundAction& x = a.trace.actions[i];
    const GroundAction& y = b.trace.actions[i];
    if (x.name != y.name) return x.name < y.name;
    if (x.binding != y.binding) return x.binding < y.binding;
  }
  return false;
}

}  // namespace

PlanTrace plan(const Problem& problem, const Domain& domain, const PlannerConfig& config) {
  PlanTrace root;
  root.states.push_back(problem.init);
  if (goal_satisfied(problem.init, problem.goal)) return root;

  std::vector<Candidate> beam;
  beam.push_back({root, evaluate(root, problem.goal, config)});

  for (int depth = 1; depth <= config.max_depth; ++depth) {
    std::vector<Candidate> candidates;
    for (const auto& entry : beam) {
      auto proposals =
          propose(entry.trace.final_state(), problem.goal, domain, problem.objects, config);
      for (auto& p : proposals) {
        if (!repair_proposal(p, entry.trace.final_state())) continue;
        Candidate next;
        next.trace = entry.trace;
        next.trace.actions.push_back(std::move(p.action));
        next.trace.states.push_back(std::move(p.predicted_next));
        next.score = evaluate(next.trace, problem.goal, config);
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), candidate_before);

    // Every candidate is verified, so the best goal claim is the plan.
    for (const auto& c : candidates) {
      if (goal_satisfied(c.trace.final_state(), problem.goal)) return c.trace;
    }

    // Keep the best candidate per predicted final state.
    std::vector<Candidate> next_beam;
    std::map<uint64_t, bool> seen;
    for (auto& c : candidates) {
      uint64_t key = c.trace.final_state().key();
      if (seen.contains(key)) continue;
      seen[key] = true;
      next_beam.push_back(std::move(c));
      if (static_cast<int>(next_beam.size()) >= config.beam_width) break;
    }
    if (next_beam.empty()) break;
    beam = std::move(next_beam);
  }
  throw Error(ErrorKind::PlanNotFound,
              "no goal-reaching trace within depth " + std::to_string(config.max_depth));
}

std::string emit_cot_trace(const PlanTrace& trace, const AtomSet& goal) {
  std::ostringstream os;
  auto atom_list = [](const AtomSet& atoms) {
    if (atoms.empty()) return std::string("none");
    std::string out;
    for (size_t i = 0; i < atoms.size(); ++i) {
      if (i) out += ", ";
      out += atoms[i].str();
    }
    return out;
  };

  os << "Goal: " << atom_list(goal) << ".\n";

  auto unmet = [&goal](const LogicalState& state) {
    AtomSet missing;
    for (const auto& atom : goal) {
      if (!state.contains(atom)) missing.push_back(atom);
    }
    return missing;
  };

  if (trace.actions.empty()) {
    AtomSet missing = trace.states.empty() ? goal : unmet(trace.states.front());
    if (missing.empty()) {
      os << "Goal already satisfied in the initial state.\n";
    } else {
      os << "No actions planned; unmet goal atoms: " << atom_list(missing) << ".\n";
    }
    return os.str();
  }

  for (size_t m = 0; m < trace.actions.size(); ++m) {
    const GroundAction& a = trace.actions[m];
    os << "Step " << (m + 1) << ": " << a.str() << ".\n";
    os << "  Deleted: " << atom_list(a.del) << ".\n";
    os << "  Added: " << atom_list(a.add) << ".\n";
    AtomSet missing = unmet(trace.states[m + 1]);
    os << "  Goal progression: " << (goal.size() - missing.size()) << "/" << goal.size()
       << " satisfied; remaining: " << atom_list(missing) << ".\n";
  }
  AtomSet missing = unmet(trace.final_state());
  if (missing.empty()) {
    os << "Plan complete: all " << goal.size() << " goal atoms satisfied after "
       << trace.actions.size() << " steps.\n";
  } else {
    os << "Plan incomplete: unmet goal atoms: " << atom_list(missing) << ".\n";
  }
  return os.str();
}

}  // namespace hwm::logic
