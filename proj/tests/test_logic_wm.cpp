#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "hwm/error.hpp"
#include "hwm/logic_wm.hpp"
#include "hwm/rng.hpp"
#include "test_util.hpp"

using namespace hwm;
using namespace hwm::logic;
using namespace hwm_test;

namespace {

Problem blocks3() {
  Problem p;
  p.name = "blocks-3";
  p.objects = {"a", "b", "c"};
  p.init = state({"ontable(a)", "ontable(b)", "ontable(c)", "clear(a)", "clear(b)", "clear(c)",
                  "handempty"});
  p.goal = atoms({"on(a,b)", "on(b,c)"});
  return p;
}

// pick-up(b), stack(b,c), pick-up(a), stack(a,b): reaches the blocks3 goal.
PlanTrace blocks3_solution(const Domain& bw, const Problem& p, size_t steps = 4) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> script = {
      {"pick-up", {"b"}}, {"stack", {"b", "c"}}, {"pick-up", {"a"}}, {"stack", {"a", "b"}}};
  PlanTrace trace;
  trace.states.push_back(p.init);
  for (size_t i = 0; i < steps; ++i) {
    GroundAction a = ground_schema(*bw.find_schema(script[i].first), script[i].second);
    trace.states.push_back(apply(a, trace.states.back()));
    trace.actions.push_back(std::move(a));
  }
  return trace;
}

}  // namespace

TEST_CASE("exact proposals match a brute force enumeration") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;

  std::vector<Proposal> proposals = propose(p.init, p.goal, bw, p.objects, config);

  // Oracle: every (schema, binding) pair whose precondition holds.
  std::vector<GroundAction> expected;
  for (const auto& sch : bw.schemas) {
    std::vector<std::vector<std::string>> bindings{{}};
    for (size_t i = 0; i < sch.params.size(); ++i) {
      std::vector<std::vector<std::string>> grown;
      for (const auto& partial : bindings)
        for (const auto& obj : p.objects) {
          auto b = partial;
          b.push_back(obj);
          grown.push_back(std::move(b));
        }
      bindings = std::move(grown);
    }
    for (const auto& b : bindings) {
      GroundAction a = ground_schema(sch, b);
      if (oracle_applicable(a, p.init)) expected.push_back(std::move(a));
    }
  }
  REQUIRE(expected.size() == 3);  // the three pick-ups

  REQUIRE(proposals.size() == expected.size());
  for (size_t i = 0; i < proposals.size(); ++i) {
    CHECK(proposals[i].action == expected[i]);
    CHECK(to_strings(proposals[i].predicted_next.atoms()) ==
          oracle_apply(expected[i], p.init));
    CHECK(proposals[i].prior == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("exact proposals satisfy the step invariant") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;
  for (const auto& prop : propose(p.init, p.goal, bw, p.objects, config)) {
    CHECK(is_applicable(prop.action, p.init));
    CHECK(prop.predicted_next == apply(prop.action, p.init));
  }
}

TEST_CASE("noisy proposer is deterministic under a fixed seed") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;
  config.proposer_noise = 0.5;
  config.rng_seed = 1234;

  auto first = propose(p.init, p.goal, bw, p.objects, config);
  auto second = propose(p.init, p.goal, bw, p.objects, config);
  REQUIRE(first.size() == second.size());
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].action == second[i].action);
    CHECK(first[i].predicted_next == second[i].predicted_next);
    CHECK(first[i].prior == second[i].prior);
  }
}

TEST_CASE("noisy proposer actually corrupts output") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;
  config.proposer_noise = 0.5;

  bool corrupted = false;
  for (uint64_t seed = 0; seed < 10 && !corrupted; ++seed) {
    config.rng_seed = seed;
    for (const auto& prop : propose(p.init, p.goal, bw, p.objects, config)) {
      if (!is_applicable(prop.action, p.init) ||
          prop.predicted_next != apply(prop.action, p.init)) {
        corrupted = true;
      }
    }
  }
  CHECK(corrupted);
}

TEST_CASE("evaluate scores a consistent goal reaching trace") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlanTrace trace = blocks3_solution(bw, p);
  PlannerConfig config;

  TrajectoryScore s = evaluate(trace, p.goal, config);
  CHECK(s.goal_alignment == doctest::Approx(1.0));
  CHECK(s.consistency_violations == 0);
  CHECK(s.total == doctest::Approx(1.0));
}

TEST_CASE("evaluate on a half satisfied goal") {
  PlanTrace trace;
  trace.states.push_back(state({"on(a,b)", "clear(a)"}));
  PlannerConfig config;
  TrajectoryScore s = evaluate(trace, atoms({"on(a,b)", "on(b,c)"}), config);
  CHECK(s.goal_alignment == doctest::Approx(0.5));
  CHECK(s.consistency_violations == 0);
  CHECK(s.total == doctest::Approx(0.5));
}

TEST_CASE("evaluate counts corrupted transitions") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlanTrace trace = blocks3_solution(bw, p);
  // Corrupt the final state: drop one goal atom.
  AtomSet last = trace.final_state().atoms();
  last.erase(std::remove(last.begin(), last.end(), atom("on(b,c)")), last.end());
  trace.states.back() = LogicalState(std::move(last));

  PlannerConfig config;
  TrajectoryScore s = evaluate(trace, p.goal, config);
  CHECK(s.goal_alignment == doctest::Approx(0.5));
  CHECK(s.consistency_violations == 1);
  CHECK(s.total == doctest::Approx(0.5 - 1.0));
}

TEST_CASE("evaluate respects configured weights") {
  PlanTrace trace;
  trace.states.push_back(state({"p(a)"}));
  PlannerConfig config;
  config.w_g = 2.0;
  config.w_c = 0.5;
  TrajectoryScore s = evaluate(trace, atoms({"p(a)", "q(a)"}), config);
  CHECK(s.total == doctest::Approx(2.0 * 0.5 - 0.5 * 0));
}

TEST_CASE("evaluate treats an empty goal as fully aligned") {
  PlanTrace trace;
  trace.states.push_back(state({}));
  PlannerConfig config;
  CHECK(evaluate(trace, {}, config).goal_alignment == doctest::Approx(1.0));
}

TEST_CASE("evaluate rejects a trace without states") {
  PlanTrace empty;
  PlannerConfig config;
  try {
    evaluate(empty, {}, config);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyInput);
  }
}

TEST_CASE("randomized: goal alignment is monotone in goal overlap") {
  Rng rng(555);
  PlannerConfig config;
  for (int trial = 0; trial < 30; ++trial) {
    RandomInstance inst = make_random_instance(rng);
    if (inst.universe.empty()) continue;
    LogicalState final_state = random_state(rng, inst.universe);
    AtomSet goal;
    for (const auto& a : inst.universe) {
      if (rng.uniform() < 0.5) goal.push_back(a);
    }
    if (goal.empty()) continue;

    PlanTrace trace;
    trace.states.push_back(final_state);
    double before = evaluate(trace, goal, config).goal_alignment;

    // Force one more goal atom to hold in the final state.
    AtomSet grown = final_state.atoms();
    grown.push_back(goal[rng.below(goal.size())]);
    trace.states.back() = LogicalState(std::move(grown));
    double after = evaluate(trace, goal, config).goal_alignment;
    CHECK(after >= before);
  }
}

TEST_CASE("consistency check accepts planner output") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;
  PlanTrace trace = plan(p, bw, config);
  CHECK(consistency_check(trace).empty());
}

TEST_CASE("consistency check flags a corrupted successor") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlanTrace trace = blocks3_solution(bw, p, 3);
  // Corrupt the last state so only step 2 breaks.
  AtomSet last = trace.final_state().atoms();
  last.push_back(atom("on(c,c)"));
  trace.states.back() = LogicalState(std::move(last));

  std::vector<Violation> v = consistency_check(trace);
  REQUIRE(v.size() == 1);
  CHECK(v[0].step == 2);
  CHECK(v[0].kind == ViolationKind::WrongSuccessor);
}

TEST_CASE("consistency check flags an inapplicable action") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlanTrace trace = blocks3_solution(bw, p, 3);
  // Nothing is held in the initial state, so stack is inapplicable there.
  trace.actions[0] = ground_schema(*bw.find_schema("stack"), {"a", "b"});

  std::vector<Violation> v = consistency_check(trace);
  REQUIRE(v.size() == 1);
  CHECK(v[0].step == 0);
  CHECK(v[0].kind == ViolationKind::Inapplicable);
}

TEST_CASE("plan returns an empty trace when the goal already holds") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  p.goal = atoms({"ontable(a)", "handempty"});
  PlannerConfig config;
  PlanTrace trace = plan(p, bw, config);
  CHECK(trace.actions.empty());
  REQUIRE(trace.states.size() == 1);
  CHECK(trace.states[0] == p.init);
}

TEST_CASE("plan matches breadth first search length on blocks3") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;
  config.beam_width = 8;
  config.max_depth = 12;

  auto optimal = bfs_plan_length(p, bw, 12);
  REQUIRE(optimal.has_value());
  CHECK(*optimal == 4);

  PlanTrace trace = plan(p, bw, config);
  CHECK(trace.length() == *optimal);
  CHECK(consistency_check(trace).empty());
  CHECK(goal_satisfied(trace.final_state(), p.goal));
  CHECK_FALSE(trace.unverified);
}

TEST_CASE("plan reports failure when no action achieves the goal") {
  Domain d;
  d.name = "micro";
  d.predicates = {{"p", 0}, {"q", 0}};
  d.schemas.push_back(schema("set-p", {}, {}, {{"p"}}, {}));

  Problem prob;
  prob.name = "micro-1";
  prob.goal = atoms({"q"});
  PlannerConfig config;
  config.max_depth = 4;
  try {
    plan(prob, d, config);
    FAIL("expected plan failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PlanNotFound);
  }
}

TEST_CASE("plan reports failure on an unreachable blocks goal") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  p.goal = atoms({"on(a,a)"});
  PlannerConfig config;
  config.max_depth = 8;
  CHECK_THROWS_AS(plan(p, bw, config), Error);
}

TEST_CASE("plan is deterministic, including under noise") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;
  config.proposer_noise = 0.25;
  config.rng_seed = 99;
  config.max_depth = 12;

  auto run = [&]() -> std::pair<bool, PlanTrace> {
    try {
      return {true, plan(p, bw, config)};
    } catch (const Error&) {
      return {false, {}};
    }
  };
  auto [ok1, t1] = run();
  auto [ok2, t2] = run();
  CHECK(ok1 == ok2);
  CHECK(t1 == t2);
}

TEST_CASE("randomized: plan length equals breadth first search") {
  Rng rng(321);
  PlannerConfig config;
  config.beam_width = 256;  // covers every distinct state of these tiny instances
  config.max_depth = 8;

  int tested = 0;
  for (int trial = 0; trial < 40; ++trial) {
    RandomInstance inst = make_random_instance(rng, 2, 2, 2, 4);

    // Random walk to a guaranteed reachable goal.
    Problem p;
    p.name = "walk";
    p.objects = inst.objects;
    p.init = random_state(rng, inst.universe);
    LogicalState cur = p.init;
    int walk = static_cast<int>(rng.below(6));
    for (int i = 0; i < walk; ++i) {
      auto options = applicable_actions(cur, inst.domain, inst.objects);
      if (options.empty()) break;
      cur = apply(options[rng.below(options.size())], cur);
    }
    p.goal = cur.atoms();

    auto optimal = bfs_plan_length(p, inst.domain, 8);
    REQUIRE(optimal.has_value());
    PlanTrace trace = plan(p, inst.domain, config);
    CHECK(trace.length() == *optimal);
    CHECK(consistency_check(trace).empty());
    CHECK(goal_satisfied(trace.final_state(), p.goal));
    ++tested;
  }
  CHECK(tested == 40);
}

TEST_CASE("noisy planning stays reliable across seeds") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;
  config.proposer_noise = 0.3;
  config.max_depth = 12;

  int successes = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    config.rng_seed = seed;
    try {
      PlanTrace trace = plan(p, bw, config);
      CHECK(consistency_check(trace).empty());
      CHECK(goal_satisfied(trace.final_state(), p.goal));
      ++successes;
    } catch (const Error&) {
    }
  }
  CHECK(successes >= 95);
}

TEST_CASE("cot rendering of a one step trace") {
  Domain d;
  d.predicates = {{"p", 0}, {"q", 0}};
  d.schemas.push_back(schema("a", {}, {{"p"}}, {{"q"}}, {{"p"}}));

  PlanTrace trace;
  trace.states.push_back(state({"p"}));
  GroundAction act = ground_schema(d.schemas[0], {});
  trace.states.push_back(apply(act, trace.states[0]));
  trace.actions.push_back(std::move(act));

  std::string text = emit_cot_trace(trace, atoms({"q"}));
  CHECK(text ==
        "Goal: q.\n"
        "Step 1: a.\n"
        "  Deleted: p.\n"
        "  Added: q.\n"
        "  Goal progression: 1/1 satisfied; remaining: none.\n"
        "Plan complete: all 1 goal atoms satisfied after 1 steps.\n");
}

TEST_CASE("cot rendering of empty traces") {
  PlanTrace satisfied;
  satisfied.states.push_back(state({"p(a)"}));
  CHECK(emit_cot_trace(satisfied, atoms({"p(a)"})) ==
        "Goal: p(a).\nGoal already satisfied in the initial state.\n");

  PlanTrace unmet;
  unmet.states.push_back(state({}));
  CHECK(emit_cot_trace(unmet, atoms({"p(a)"})) ==
        "Goal: p(a).\nNo actions planned; unmet goal atoms: p(a).\n");
}

TEST_CASE("cot rendering is deterministic") {
  Domain bw = make_blocksworld();
  Problem p = blocks3();
  PlannerConfig config;
  PlanTrace trace = plan(p, bw, config);
  std::string first = emit_cot_trace(trace, p.goal);
  CHECK(first == emit_cot_trace(trace, p.goal));
  CHECK(first.find("Plan complete") != std::string::npos);
  CHECK(std::count(first.begin(), first.end(), '\n') >= 4);
}
