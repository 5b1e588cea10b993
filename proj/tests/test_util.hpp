#pragma once

// Shared helpers for the test suites: fixture loading, a random STRIPS
// domain generator, and independent oracles the implementations are
// checked against.

#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hwm/rng.hpp"
#include "hwm/symbolic.hpp"

namespace hwm_test {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string fixture(const std::string& name) {
  return read_file(std::string(HWM_FIXTURE_DIR) + "/" + name);
}

inline hwm::GroundAtom atom(const std::string& text) { return hwm::GroundAtom::parse(text); }

inline hwm::AtomSet atoms(const std::vector<std::string>& texts) {
  hwm::AtomSet out;
  for (const auto& t : texts) out.push_back(atom(t));
  hwm::normalize_atoms(out);
  return out;
}

inline hwm::LogicalState state(const std::vector<std::string>& texts) {
  return hwm::LogicalState(atoms(texts));
}

// ---------------------------------------------------------------------------
// Independent set-arithmetic oracle over atom strings. Kept deliberately
// separate from the set operations in hwm::apply.

inline std::set<std::string> to_strings(const hwm::AtomSet& atoms) {
  std::set<std::string> out;
  for (const auto& a : atoms) out.insert(a.str());
  return out;
}

inline bool oracle_applicable(const hwm::GroundAction& action, const hwm::LogicalState& st) {
  std::set<std::string> have = to_strings(st.atoms());
  for (const auto& p : action.pre) {
    if (have.find(p.str()) == have.end()) return false;
  }
  return true;
}

inline std::set<std::string> oracle_apply(const hwm::GroundAction& action,
                                          const hwm::LogicalState& st) {
  std::set<std::string> result = to_strings(st.atoms());
  for (const auto& d : action.del) result.erase(d.str());
  for (const auto& a : action.add) result.insert(a.str());
  return result;
}

// ---------------------------------------------------------------------------
// Blocksworld built by hand, independent of the parser. Matches the
// blocksworld.pddl fixture structurally.

inline hwm::ActionSchema schema(const std::string& name, std::vector<std::string> params,
                                const std::vector<std::vector<std::string>>& pre,
                                const std::vector<std::vector<std::string>>& add,
                                const std::vector<std::vector<std::string>>& del) {
  auto lift = [](const std::vector<std::vector<std::string>>& rows) {
    std::vector<hwm::SchemaAtom> out;
    for (const auto& row : rows) {
      hwm::SchemaAtom a;
      a.predicate = row[0];
      a.vars.assign(row.begin() + 1, row.end());
      out.push_back(std::move(a));
    }
    return out;
  };
  hwm::ActionSchema s;
  s.name = name;
  s.params = std::move(params);
  s.pre = lift(pre);
  s.add = lift(add);
  s.del = lift(del);
  return s;
}

inline hwm::Domain make_blocksworld() {
  hwm::Domain d;
  d.name = "blocksworld";
  d.predicates = {{"clear", 1}, {"handempty", 0}, {"holding", 1}, {"on", 2}, {"ontable", 1}};
  d.schemas.push_back(schema("pick-up", {"?x"},
                             {{"clear", "?x"}, {"ontable", "?x"}, {"handempty"}},
                             {{"holding", "?x"}},
                             {{"ontable", "?x"}, {"clear", "?x"}, {"handempty"}}));
  d.schemas.push_back(schema("put-down", {"?x"},
                             {{"holding", "?x"}},
                             {{"ontable", "?x"}, {"clear", "?x"}, {"handempty"}},
                             {{"holding", "?x"}}));
  d.schemas.push_back(schema("stack", {"?x", "?y"},
                             {{"holding", "?x"}, {"clear", "?y"}},
                             {{"on", "?x", "?y"}, {"clear", "?x"}, {"handempty"}},
                             {{"holding", "?x"}, {"clear", "?y"}}));
  d.schemas.push_back(schema("unstack", {"?x", "?y"},
                             {{"on", "?x", "?y"}, {"clear", "?x"}, {"handempty"}},
                             {{"holding", "?x"}, {"clear", "?y"}},
                             {{"on", "?x", "?y"}, {"clear", "?x"}, {"handempty"}}));
  return d;
}

// ---------------------------------------------------------------------------
// Random STRIPS instances (small, untyped) for property tests.

struct RandomInstance {
  hwm::Domain domain;
  std::vector<std::string> objects;
  hwm::AtomSet universe;
};

inline RandomInstance make_random_instance(hwm::Rng& rng, int max_preds = 4, int max_arity = 2,
                                           int max_objs = 4, int max_schemas = 5) {
  RandomInstance inst;
  inst.domain.name = "rand";
  int npred = 1 + static_cast<int>(rng.below(max_preds));
  for (int i = 0; i < npred; ++i) {
    hwm::Predicate p;
    p.name = std::string("p") + static_cast<char>('a' + i);
    p.arity = static_cast<int>(rng.below(max_arity + 1));
    inst.domain.predicates.push_back(p);
  }
  int nobj = 1 + static_cast<int>(rng.below(max_objs));
  for (int i = 0; i < nobj; ++i) inst.objects.push_back(std::string("o") + static_cast<char>('a' + i));

  int nschema = 1 + static_cast<int>(rng.below(max_schemas));
  for (int s = 0; s < nschema; ++s) {
    hwm::ActionSchema schema;
    schema.name = std::string("s") + static_cast<char>('a' + s);
    int nparams = static_cast<int>(rng.below(4));
    for (int i = 0; i < nparams; ++i) schema.params.push_back(std::string("?v") + static_cast<char>('a' + i));

    auto random_atoms = [&rng, &inst, &schema]() {
      std::vector<hwm::SchemaAtom> out;
      int n = static_cast<int>(rng.below(4));
      for (int i = 0; i < n; ++i) {
        const hwm::Predicate& p =
            inst.domain.predicates[rng.below(inst.domain.predicates.size())];
        if (p.arity > 0 && schema.params.empty()) continue;
        hwm::SchemaAtom a;
        a.predicate = p.name;
        for (int k = 0; k < p.arity; ++k) a.vars.push_back(schema.params[rng.below(schema.params.size())]);
        bool dup = false;
        for (const auto& prev : out) dup = dup || prev == a;
        if (!dup) out.push_back(std::move(a));
      }
      return out;
    };
    schema.pre = random_atoms();
    schema.add = random_atoms();
    schema.del = random_atoms();
    inst.domain.schemas.push_back(std::move(schema));
  }
  inst.universe = hwm::all_ground_atoms(inst.domain, inst.objects);
  return inst;
}

inline hwm::LogicalState random_state(hwm::Rng& rng, const hwm::AtomSet& universe) {
  hwm::AtomSet atoms;
  for (const auto& a : universe) {
    if (rng.uniform() < 0.4) atoms.push_back(a);
  }
  return hwm::LogicalState(std::move(atoms));
}

inline hwm::GroundAction random_ground_action(hwm::Rng& rng, const RandomInstance& inst) {
  const hwm::ActionSchema& schema = inst.domain.schemas[rng.below(inst.domain.schemas.size())];
  std::vector<std::string> binding;
  for (size_t i = 0; i < schema.params.size(); ++i) {
    binding.push_back(inst.objects[rng.below(inst.objects.size())]);
  }
  return hwm::ground_schema(schema, binding);
}

// ---------------------------------------------------------------------------
// Breadth-first search over the full transition graph; returns the optimal
// plan length, or nullopt if the goal is unreachable within max_depth.

inline std::optional<size_t> bfs_plan_length(const hwm::Problem& problem,
                                             const hwm::Domain& domain, size_t max_depth) {
  if (hwm::goal_satisfied(problem.init, problem.goal)) return 0;
  std::set<uint64_t> visited{problem.init.key()};
  std::queue<std::pair<hwm::LogicalState, size_t>> frontier;
  frontier.push({problem.init, 0});
  while (!frontier.empty()) {
    auto [st, depth] = frontier.front();
    frontier.pop();
    if (depth >= max_depth) continue;
    for (const auto& action : hwm::applicable_actions(st, domain, problem.objects)) {
      hwm::LogicalState next = hwm::apply(action, st);
      if (hwm::goal_satisfied(next, problem.goal)) return depth + 1;
      if (visited.insert(next.key()).second) frontier.push({next, depth + 1});
    }
  }
  return std::nullopt;
}

}  // namespace hwm_test
