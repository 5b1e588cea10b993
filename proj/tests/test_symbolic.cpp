#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "hwm/error.hpp"
#include "hwm/rng.hpp"
#include "hwm/symbolic.hpp"
#include "test_util.hpp"

using namespace hwm;
using namespace hwm_test;

TEST_CASE("ground atom text round trip") {
  GroundAtom a = GroundAtom::parse("on(a,b)");
  CHECK(a.predicate == "on");
  CHECK(a.args == std::vector<std::string>{"a", "b"});
  CHECK(a.str() == "on(a,b)");

  GroundAtom nullary = GroundAtom::parse("handempty");
  CHECK(nullary.predicate == "handempty");
  CHECK(nullary.args.empty());
  CHECK(nullary.str() == "handempty");

  CHECK(GroundAtom::parse(a.str()) == a);
}

TEST_CASE("logical state canonicalizes atoms") {
  LogicalState s(atoms({"on(a,b)", "clear(a)", "on(a,b)", "handempty"}));
  CHECK(s.size() == 3);
  CHECK(s == state({"handempty", "clear(a)", "on(a,b)"}));
  CHECK(s.contains(atom("clear(a)")));
  CHECK_FALSE(s.contains(atom("clear(b)")));
  CHECK(s.key() == state({"on(a,b)", "handempty", "clear(a)"}).key());
  CHECK(s.key() != state({"on(a,b)"}).key());
}

TEST_CASE("all ground atoms counting") {
  Domain d1;
  d1.predicates = {{"p", 1}};
  CHECK(all_ground_atoms(d1, {"a", "b", "c"}).size() == 3);

  Domain d2;
  d2.predicates = {{"p", 2}, {"q", 2}};
  CHECK(all_ground_atoms(d2, {"a", "b"}).size() == 8);

  Domain d3;
  d3.predicates = {{"p", 1}};
  CHECK(all_ground_atoms(d3, {}).empty());
}

TEST_CASE("all ground atoms matches exhaustive enumeration") {
  std::vector<std::string> blocks = {"a", "b", "c"};

  // Gripper-style block domain without a table predicate: 9 + 3 + 3 + 1.
  Domain gripper;
  gripper.predicates = {{"clear", 1}, {"handempty", 0}, {"holding", 1}, {"on", 2}};
  std::set<std::string> expected;
  for (const auto& x : blocks) {
    for (const auto& y : blocks) expected.insert("on(" + x + "," + y + ")");
    expected.insert("clear(" + x + ")");
    expected.insert("holding(" + x + ")");
  }
  expected.insert("handempty");
  CHECK(expected.size() == 16);

  AtomSet universe = all_ground_atoms(gripper, blocks);
  CHECK(universe.size() == 16);
  CHECK(to_strings(universe) == expected);
  CHECK(std::is_sorted(universe.begin(), universe.end()));

  // Adding ontable/1 grows the universe by one atom per block.
  AtomSet full = all_ground_atoms(make_blocksworld(), blocks);
  CHECK(full.size() == 19);
  for (const auto& x : blocks) expected.insert("ontable(" + x + ")");
  CHECK(to_strings(full) == expected);
}

TEST_CASE("ground schema substitutes positionally") {
  Domain bw = make_blocksworld();
  const ActionSchema* pick = bw.find_schema("pick-up");
  REQUIRE(pick != nullptr);

  GroundAction a = ground_schema(*pick, {"cubea"});
  CHECK(a.name == "pick-up");
  CHECK(a.str() == "pick-up(cubea)");
  CHECK(to_strings(a.pre) == std::set<std::string>{"clear(cubea)", "ontable(cubea)", "handempty"});
  CHECK(to_strings(a.add) == std::set<std::string>{"holding(cubea)"});
  CHECK(to_strings(a.del) == std::set<std::string>{"ontable(cubea)", "clear(cubea)", "handempty"});
}

TEST_CASE("ground schema rejects wrong binding length") {
  Domain bw = make_blocksworld();
  const ActionSchema* stack = bw.find_schema("stack");
  REQUIRE(stack != nullptr);
  try {
    ground_schema(*stack, {"a"});
    FAIL("expected arity mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ArityMismatch);
  }
}

TEST_CASE("ground schema permits repeated objects") {
  Domain bw = make_blocksworld();
  GroundAction a = ground_schema(*bw.find_schema("stack"), {"a", "a"});
  CHECK(a.str() == "stack(a,a)");
  CHECK(to_strings(a.pre) == std::set<std::string>{"holding(a)", "clear(a)"});
  CHECK(to_strings(a.add) == std::set<std::string>{"on(a,a)", "clear(a)", "handempty"});
}

TEST_CASE("applicability is precondition subset") {
  GroundAction empty_pre;
  CHECK(is_applicable(empty_pre, state({})));
  CHECK(is_applicable(empty_pre, state({"on(a,b)"})));

  GroundAction needs_on;
  needs_on.pre = atoms({"on(a,b)"});
  CHECK(is_applicable(needs_on, state({"on(a,b)", "clear(a)"})));
  CHECK_FALSE(is_applicable(needs_on, state({"clear(a)"})));
}

TEST_CASE("apply deletes then adds") {
  GroundAction a;
  a.pre = atoms({"handempty", "clear(c)"});
  a.del = atoms({"handempty", "clear(c)"});
  a.add = atoms({"holding(c)"});
  CHECK(apply(a, state({"handempty", "clear(c)"})) == state({"holding(c)"}));
}

TEST_CASE("atom in both del and add survives") {
  GroundAction a;
  a.del = atoms({"q(x)"});
  a.add = atoms({"q(x)"});
  CHECK(apply(a, state({"q(x)", "r(x)"})) == state({"q(x)", "r(x)"}));
  CHECK(apply(a, state({"r(x)"})) == state({"q(x)", "r(x)"}));
}

TEST_CASE("apply with empty effects is identity") {
  GroundAction a;
  LogicalState s = state({"on(a,b)", "clear(a)"});
  CHECK(apply(a, s) == s);
}

TEST_CASE("apply rejects inapplicable actions") {
  GroundAction a;
  a.pre = atoms({"holding(c)"});
  try {
    apply(a, state({"handempty"}));
    FAIL("expected inapplicable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Inapplicable);
  }
}

TEST_CASE("goal satisfaction is subset semantics") {
  LogicalState s = state({"on(a,b)", "clear(a)"});
  CHECK(goal_satisfied(s, {}));
  CHECK(goal_satisfied(s, s.atoms()));
  CHECK_FALSE(goal_satisfied(s, atoms({"on(a,b)", "handempty"})));
}

TEST_CASE("applicable actions match a brute force oracle on blocksworld") {
  Domain bw = make_blocksworld();
  std::vector<std::string> blocks = {"a", "b"};
  LogicalState s = state({"on(a,b)", "clear(a)", "handempty"});

  std::vector<GroundAction> got = applicable_actions(s, bw, blocks);

  // Oracle: enumerate every schema x binding, filter by the set oracle.
  std::vector<GroundAction> expected;
  for (const auto& sch : bw.schemas) {
    std::vector<std::vector<std::string>> bindings;
    if (sch.params.size() == 1) {
      for (const auto& x : blocks) bindings.push_back({x});
    } else if (sch.params.size() == 2) {
      for (const auto& x : blocks)
        for (const auto& y : blocks) bindings.push_back({x, y});
    } else {
      bindings.push_back({});
    }
    for (const auto& b : bindings) {
      GroundAction a = ground_schema(sch, b);
      if (oracle_applicable(a, s)) expected.push_back(a);
    }
  }
  REQUIRE(expected.size() == 1);
  CHECK(expected[0].str() == "unstack(a,b)");
  REQUIRE(got.size() == 1);
  CHECK(got[0] == expected[0]);
}

TEST_CASE("applicable actions edge cases") {
  Domain empty;
  CHECK(applicable_actions(state({"p(a)"}), empty, {"a"}).empty());

  Domain bw = make_blocksworld();
  CHECK(applicable_actions(state({}), bw, {"a", "b"}).empty());
}

TEST_CASE("applicable actions are ordered by schema then binding") {
  Domain bw = make_blocksworld();
  LogicalState s = state({"ontable(a)", "ontable(b)", "clear(a)", "clear(b)", "handempty"});
  std::vector<GroundAction> got = applicable_actions(s, bw, {"b", "a"});
  REQUIRE(got.size() == 2);
  CHECK(got[0].str() == "pick-up(a)");
  CHECK(got[1].str() == "pick-up(b)");
}

TEST_CASE("apply is deterministic") {
  Domain bw = make_blocksworld();
  LogicalState s = state({"on(a,b)", "clear(a)", "handempty"});
  GroundAction a = ground_schema(*bw.find_schema("unstack"), {"a", "b"});
  CHECK(apply(a, s) == apply(a, s));
}

TEST_CASE("randomized: apply agrees with the set arithmetic oracle") {
  Rng rng(20260814);
  int applied = 0, rejected = 0;
  for (int trial = 0; trial < 50; ++trial) {
    RandomInstance inst = make_random_instance(rng);
    for (int i = 0; i < 20; ++i) {
      LogicalState s = random_state(rng, inst.universe);
      GroundAction a = random_ground_action(rng, inst);
      bool applicable = is_applicable(a, s);
      CHECK(applicable == oracle_applicable(a, s));
      if (applicable) {
        LogicalState next = apply(a, s);
        CHECK(to_strings(next.atoms()) == oracle_apply(a, s));
        CHECK(std::is_sorted(next.atoms().begin(), next.atoms().end()));
        ++applied;
      } else {
        CHECK_THROWS_AS(apply(a, s), Error);
        ++rejected;
      }
    }
  }
  // Both branches must actually be exercised.
  CHECK(applied + rejected == 1000);
  CHECK(applied > 100);
  CHECK(rejected > 100);
}

TEST_CASE("randomized: frame property") {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    RandomInstance inst = make_random_instance(rng);
    for (int i = 0; i < 10; ++i) {
      LogicalState s = random_state(rng, inst.universe);
      GroundAction a = random_ground_action(rng, inst);
      if (!is_applicable(a, s)) continue;
      LogicalState next = apply(a, s);
      std::set<std::string> touched;
      for (const auto& x : a.add) touched.insert(x.str());
      for (const auto& x : a.del) touched.insert(x.str());
      for (const auto& atom : inst.universe) {
        if (touched.count(atom.str())) continue;
        CHECK(s.contains(atom) == next.contains(atom));
      }
    }
  }
}

TEST_CASE("randomized: deletion free actions grow the state") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    RandomInstance inst = make_random_instance(rng);
    for (int i = 0; i < 10; ++i) {
      LogicalState s = random_state(rng, inst.universe);
      GroundAction a = random_ground_action(rng, inst);
      a.del.clear();
      if (!is_applicable(a, s)) continue;
      LogicalState next = apply(a, s);
      CHECK(atoms_include(next.atoms(), s.atoms()));
    }
  }
}

TEST_CASE("randomized: applicable_actions equals filtered enumeration") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    RandomInstance inst = make_random_instance(rng);
    LogicalState s = random_state(rng, inst.universe);
    std::vector<GroundAction> got = applicable_actions(s, inst.domain, inst.objects);
    for (const auto& a : got) CHECK(oracle_applicable(a, s));
    // The list is deterministic and sorted by (schema, binding).
    std::vector<GroundAction> again = applicable_actions(s, inst.domain, inst.objects);
    CHECK(got == again);
    for (size_t i = 1; i < got.size(); ++i) {
      bool ordered = got[i - 1].name < got[i].name ||
                     (got[i - 1].name == got[i].name && got[i - 1].binding < got[i].binding);
      CHECK(ordered);
    }
    // Exhaustive count cross-check via the oracle.
    size_t expected = 0;
    for (const auto& sch : inst.domain.schemas) {
      std::vector<std::vector<std::string>> bindings{{}};
      for (size_t p = 0; p < sch.params.size(); ++p) {
        std::vector<std::vector<std::string>> grown;
        for (const auto& partial : bindings) {
          for (const auto& obj : inst.objects) {
            auto next = partial;
            next.push_back(obj);
            grown.push_back(std::move(next));
          }
        }
        bindings = std::move(grown);
      }
      for (const auto& b : bindings) {
        if (oracle_applicable(ground_schema(sch, b), s)) ++expected;
      }
    }
    CHECK(got.size() == expected);
  }
}
