#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace hwm {

// STRIPS building blocks. All types are immutable values after construction;
// every operation below is a pure function.

struct Predicate {
  std::string name;
  int arity = 0;

  auto operator<=>(const Predicate&) const = default;
};

struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;

  auto operator<=>(const GroundAtom&) const = default;

  // "on(a,b)"; zero-arity atoms print bare ("handempty").
  std::string str() const;
  static GroundAtom parse(const std::string& text);
};

using AtomSet = std::vector<GroundAtom>;  // kept sorted and unique

// Sorts and deduplicates in place.
void normalize_atoms(AtomSet& atoms);

// True iff sub ⊆ super; both must be normalized.
bool atoms_include(const AtomSet& super, const AtomSet& sub);

// Set of true ground atoms, stored in canonical sorted order so that
// equality and hashing are deterministic.
class LogicalState {
 public:
  LogicalState() = default;
  explicit LogicalState(AtomSet atoms);

  bool contains(const GroundAtom& atom) const;
  bool includes(const AtomSet& subset) const { return atoms_include(atoms_, subset); }
  const AtomSet& atoms() const { return atoms_; }
  size_t size() const { return atoms_.size(); }
  uint64_t key() const;  // stable content hash

  auto operator<=>(const LogicalState&) const = default;

 private:
  AtomSet atoms_;
};

// Atom over schema parameters ("?x" style variables).
struct SchemaAtom {
  std::string predicate;
  std::vector<std::string> vars;

  auto operator<=>(const SchemaAtom&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<std::string> params;
  std::vector<SchemaAtom> pre;
  std::vector<SchemaAtom> add;
  std::vector<SchemaAtom> del;

  auto operator<=>(const ActionSchema&) const = default;
};

struct GroundAction {
  std::string name;
  std::vector<std::string> binding;
  AtomSet pre;
  AtomSet add;
  AtomSet del;

  auto operator<=>(const GroundAction&) const = default;

  std::string str() const;  // "pick(a)"
};

struct Domain {
  std::string name;
  std::vector<Predicate> predicates;   // sorted by name
  std::vector<ActionSchema> schemas;   // sorted by name

  const Predicate* find_predicate(const std::string& name) const;
  const ActionSchema* find_schema(const std::string& name) const;
};

struct Problem {
  std::string name;
  std::vector<std::string> objects;  // sorted
  LogicalState init;
  AtomSet goal;
};

// { p(o_1..o_k) | p in domain, o_i in objects }, canonical order.
AtomSet all_ground_atoms(const Domain& domain, const std::vector<std::string>& objects);

// Positional substitution of binding into the schema's atom sets.
// Throws Error(ArityMismatch) when binding length != parameter count.
GroundAction ground_schema(const ActionSchema& schema, const std::vector<std::string>& binding);

// Pre(a) ⊆ state.
bool is_applicable(const GroundAction& action, const LogicalState& state);

// (state \ Del(a)) ∪ Add(a), delete first then add.
// Throws Error(Inapplicable) when the precondition check fails.
LogicalState apply(const GroundAction& action, const LogicalState& state);

bool goal_satisfied(const LogicalState& state, const AtomSet& goal);

// All applicable ground actions, ordered by schema name then binding.
std::vector<GroundAction> applicable_actions(const LogicalState& state, const Domain& domain,
                                             const std::vector<std::string>& objects);

}  // namespace hwm
