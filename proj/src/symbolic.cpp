#include "hwm/symbolic.hpp"

#include <algorithm>
#include <map>

#include "hwm/error.hpp"
#include "hwm/rng.hpp"

namespace hwm {

std::string GroundAtom::str() const {
  if (args.empty()) return predicate;
  std::string out = predicate;
  out += '(';
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) out += ',';
    out += args[i];
  }
  out += ')';
  return out;
}

GroundAtom GroundAtom::parse(const std::string& text) {
  GroundAtom atom;
  auto open = text.find('(');
  if (open == std::string::npos) {
    atom.predicate = text;
    return atom;
  }
  atom.predicate = text.substr(0, open);
  size_t pos = open + 1;
  std::string cur;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (c == ',' || c == ')') {
      if (!cur.empty()) atom.args.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return atom;
}

void normalize_atoms(AtomSet& atoms) {
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
}

bool atoms_include(const AtomSet& super, const AtomSet& sub) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

LogicalState::LogicalState(AtomSet atoms) : atoms_(std::move(atoms)) {
  normalize_atoms(atoms_);
}

bool LogicalState::contains(const GroundAtom& atom) const {
  return std::binary_search(atoms_.begin(), atoms_.end(), atom);
}

uint64_t LogicalState::key() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& a : atoms_) {
    h = fnv1a(a.str(), h);
    h = fnv1a(";", h);
  }
  return h;
}

std::string GroundAction::str() const {
  GroundAtom view{name, binding};
  return view.str();
}

const Predicate* Domain::find_predicate(const std::string& pname) const {
  for (const auto& p : predicates)
    if (p.name == pname) return &p;
  return nullptr;
}

const ActionSchema* Domain::find_schema(const std::string& sname) const {
  for (const auto& s : schemas)
    if (s.name == sname) return &s;
  return nullptr;
}

AtomSet all_ground_atoms(const Domain& domain, const std::vector<std::string>& objects) {
  std::vector<std::string> objs = objects;
  std::sort(objs.begin(), objs.end());
  AtomSet universe;
  for (const auto& pred : domain.predicates) {
    if (pred.arity > 0 && objs.empty()) continue;
    std::vector<size_t> idx(pred.arity, 0);
    while (true) {
      GroundAtom atom;
      atom.predicate = pred.name;
      atom.args.reserve(pred.arity);
      for (int i = 0; i < pred.arity; ++i) atom.args.push_back(objs[idx[i]]);
      universe.push_back(std::move(atom));
      // odometer over object tuples
      int pos = pred.arity - 1;
      while (pos >= 0) {
        if (++idx[pos] < objs.size()) break;
        idx[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
  }
  normalize_atoms(universe);
  return universe;
}

GroundAction ground_schema(const ActionSchema& schema, const std::vector<std::string>& binding) {
  if (binding.size() != schema.params.size()) {
    throw Error(ErrorKind::ArityMismatch,
                "schema '" + schema.name + "' expects " + std::to_string(schema.params.size()) +
                    " objects, got " + std::to_string(binding.size()));
  }
  std::map<std::string, std::string> subst;
  for (size_t i = 0; i < schema.params.size(); ++i) subst[schema.params[i]] = binding[i];

  auto substitute = [&subst](const std::vector<SchemaAtom>& lifted) {
    AtomSet out;
    out.reserve(lifted.size());
    for (const auto& la : lifted) {
      GroundAtom atom;
      atom.predicate = la.predicate;
      atom.args.reserve(la.vars.size());
      for (const auto& v : la.vars) atom.args.push_back(subst.at(v));
      out.push_back(std::move(atom));
    }
    normalize_atoms(out);
    return out;
  };

  GroundAction action;
  action.name = schema.name;
  action.binding = binding;
  action.pre = substitute(schema.pre);
  action.add = substitute(schema.add);
  action.del = substitute(schema.del);
  return action;
}

bool is_applicable(const GroundAction& action, const LogicalState& state) {
  return state.includes(action.pre);
}

LogicalState apply(const GroundAction& action, const LogicalState& state) {
  if (!is_applicable(action, state)) {
    throw Error(ErrorKind::Inapplicable, action.str() + " precondition not satisfied");
  }
  AtomSet result;
  result.reserve(state.size() + action.add.size());
  std::set_difference(state.atoms().begin(), state.atoms().end(), action.del.begin(),
                      action.del.end(), std::back_inserter(result));
  AtomSet merged;
  merged.reserve(result.size() + action.add.size());
  std::set_union(result.begin(), result.end(), action.add.begin(), action.add.end(),
                 std::back_inserter(merged));
  return LogicalState(std::move(merged));
}

bool goal_satisfied(const LogicalState& state, const AtomSet& goal) {
  return state.includes(goal);
}

std::vector<GroundAction> applicable_actions(const LogicalState& state, const Domain& domain,
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
      GroundAction action = ground_schema(*schema, binding);
      if (is_applicable(action, state)) out.push_back(std::move(action));
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

}  // namespace hwm
