#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <sstream>

#include "hwm/domain_io.hpp"
#include "hwm/rng.hpp"
#include "test_util.hpp"

using namespace hwm;
using namespace hwm::io;
using namespace hwm_test;

TEST_CASE("parses a minimal domain") {
  Domain d = parse_domain(
      "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) "
      ":precondition (p ?x) :effect (not (p ?x))))");
  CHECK(d.name == "d");
  REQUIRE(d.predicates.size() == 1);
  CHECK(d.predicates[0].name == "p");
  CHECK(d.predicates[0].arity == 1);
  REQUIRE(d.schemas.size() == 1);
  const ActionSchema& a = d.schemas[0];
  CHECK(a.name == "a");
  CHECK(a.params == std::vector<std::string>{"?x"});
  REQUIRE(a.pre.size() == 1);
  CHECK(a.pre[0].predicate == "p");
  CHECK(a.add.empty());
  REQUIRE(a.del.size() == 1);
  CHECK(a.del[0].predicate == "p");
  CHECK(a.del[0].vars == std::vector<std::string>{"?x"});
}

TEST_CASE("blocksworld fixture parses to the hand built domain") {
  Domain parsed = parse_domain(fixture("blocksworld.pddl"));
  Domain expected = make_blocksworld();
  CHECK(parsed.name == expected.name);
  CHECK(parsed.predicates == expected.predicates);
  CHECK(parsed.schemas == expected.schemas);
}

TEST_CASE("parsing ignores whitespace style and letter case") {
  std::string text = fixture("blocksworld.pddl");
  std::string mangled = text;
  for (char& c : mangled) {
    if (c == ' ') c = '\t';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  Domain a = parse_domain(text);
  Domain b = parse_domain(mangled);
  CHECK(a.name == b.name);
  CHECK(a.predicates == b.predicates);
  CHECK(a.schemas == b.schemas);
}

TEST_CASE("parses the three block problem") {
  Domain bw = parse_domain(fixture("blocksworld.pddl"));
  Problem p = parse_problem(fixture("blocks3.pddl"), bw);
  CHECK(p.name == "blocks-3");
  CHECK(p.objects == std::vector<std::string>{"a", "b", "c"});
  // Hand count of the fixture's :init section.
  CHECK(p.init.size() == 7);
  CHECK(p.init == state({"ontable(a)", "ontable(b)", "ontable(c)", "clear(a)", "clear(b)",
                         "clear(c)", "handempty"}));
  CHECK(p.goal == atoms({"on(a,b)", "on(b,c)"}));
}

TEST_CASE("empty init section yields an empty state") {
  Domain bw = make_blocksworld();
  Problem p = parse_problem(
      "(define (problem e) (:domain blocksworld) (:objects a) (:init) (:goal (ontable a)))", bw);
  CHECK(p.init.size() == 0);
  CHECK(p.goal == atoms({"ontable(a)"}));
}

TEST_CASE("single atom goal needs no and wrapper") {
  Domain bw = make_blocksworld();
  Problem p = parse_problem(
      "(define (problem e) (:domain blocksworld) (:objects a) (:init (ontable a)) "
      "(:goal (clear a)))",
      bw);
  CHECK(p.goal == atoms({"clear(a)"}));
}

TEST_CASE("comments are skipped") {
  Domain d = parse_domain(
      "; a domain\n(define (domain d) ; inline\n (:predicates (p)) "
      "(:action a :parameters () :effect (p)))");
  CHECK(d.predicates.size() == 1);
  CHECK(d.schemas.size() == 1);
}

TEST_CASE("all collected errors are reported") {
  try {
    parse_domain(
        "(define (domain d)\n"
        "  (:predicates (p ?x))\n"
        "  (:action a :parameters (?x) :effect (and (q ?x) (r ?x))))");
    FAIL("expected parse failure");
  } catch (const ParseFailure& e) {
    REQUIRE(e.errors().size() == 2);
    CHECK(e.errors()[0].kind == ParseErrorKind::UnknownPredicate);
    CHECK(e.errors()[1].kind == ParseErrorKind::UnknownPredicate);
    // what() carries the first formatted error
    CHECK(std::string(e.what()) == e.errors()[0].format());
  }
}

TEST_CASE("error format is line:col: kind: message") {
  ParseError err{{3, 14, 2}, ParseErrorKind::UnboundVariable, "'?y' is not bound"};
  CHECK(err.format() == "3:14: unbound-variable: '?y' is not bound");
}

TEST_CASE("malformed corpus reports errors inside the offending token") {
  namespace fs = std::filesystem;
  Domain bw = make_blocksworld();
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(std::string(HWM_FIXTURE_DIR) + "/malformed")) {
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  REQUIRE(files.size() >= 20);

  for (const auto& path : files) {
    CAPTURE(path.filename().string());
    std::string text = read_file(path.string());

    // First line: "; expect <kind> <line> <col> <len>" giving the offending
    // token's position and extent.
    std::istringstream header(text.substr(0, text.find('\n')));
    std::string semi, expect_word, kind;
    int line = 0, col = 0, len = 0;
    header >> semi >> expect_word >> kind >> line >> col >> len;
    REQUIRE(expect_word == "expect");
    REQUIRE(line >= 1);
    REQUIRE(len >= 1);

    bool threw = false;
    std::vector<ParseError> errors;
    try {
      if (path.filename().string().rfind("prob_", 0) == 0) {
        parse_problem(text, bw);
      } else {
        parse_domain(text);
      }
    } catch (const ParseFailure& e) {
      threw = true;
      errors = e.errors();
    }
    CHECK(threw);
    bool found = false;
    for (const auto& err : errors) {
      if (std::string(to_string(err.kind)) == kind && err.span.line == line &&
          err.span.column >= col && err.span.column < col + len) {
        found = true;
      }
      CHECK(err.span.line >= 1);
      CHECK(err.span.column >= 1);
    }
    if (!found && !errors.empty()) {
      CAPTURE(errors[0].format());
    }
    CHECK(found);
  }
}

TEST_CASE("domain round trips through serialization") {
  Domain bw = parse_domain(fixture("blocksworld.pddl"));
  std::string text = serialize_domain(bw);
  Domain again = parse_domain(text);
  CHECK(again.name == bw.name);
  CHECK(again.predicates == bw.predicates);
  CHECK(again.schemas == bw.schemas);
  CHECK(serialize_domain(again) == text);
}

TEST_CASE("problem round trips through serialization") {
  Domain bw = parse_domain(fixture("blocksworld.pddl"));
  Problem p = parse_problem(fixture("blocks3.pddl"), bw);
  Problem again = parse_problem(serialize_problem(p, bw), bw);
  CHECK(again.name == p.name);
  CHECK(again.objects == p.objects);
  CHECK(again.init == p.init);
  CHECK(again.goal == p.goal);
}

TEST_CASE("randomized: generated domains and problems round trip") {
  Rng rng(314159);
  for (int trial = 0; trial < 25; ++trial) {
    RandomInstance inst = make_random_instance(rng);
    Domain again = parse_domain(serialize_domain(inst.domain));
    CHECK(again.name == inst.domain.name);
    CHECK(again.predicates == inst.domain.predicates);
    CHECK(again.schemas == inst.domain.schemas);

    Problem p;
    p.name = "rand";
    p.objects = inst.objects;
    p.init = random_state(rng, inst.universe);
    for (const auto& a : inst.universe) {
      if (rng.uniform() < 0.3) p.goal.push_back(a);
    }
    Problem pr = parse_problem(serialize_problem(p, inst.domain), inst.domain);
    CHECK(pr.name == p.name);
    CHECK(pr.objects == p.objects);
    CHECK(pr.init == p.init);
    CHECK(pr.goal == p.goal);
  }
}

namespace {

PlanTrace make_unstack_trace() {
  Domain bw = make_blocksworld();
  PlanTrace trace;
  trace.states.push_back(state({"on(a,b)", "ontable(b)", "clear(a)", "handempty"}));
  GroundAction a = ground_schema(*bw.find_schema("unstack"), {"a", "b"});
  trace.states.push_back(apply(a, trace.states[0]));
  trace.actions.push_back(std::move(a));
  return trace;
}

}  // namespace

TEST_CASE("empty trace serializes to just the header") {
  PlanTrace empty;
  std::string text = serialize_trace(empty);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  CHECK(text.find("hwm-trace") != std::string::npos);
  PlanTrace back = parse_trace(text);
  CHECK(back == empty);
}

TEST_CASE("one step trace has two state records and one action record") {
  PlanTrace trace = make_unstack_trace();
  std::string text = serialize_trace(trace);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);  // header + s0 + a1 + s1

  size_t state_records = 0, action_records = 0;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.find("state_atoms") != std::string::npos) ++state_records;
    if (line.find("\"action\"") != std::string::npos) ++action_records;
  }
  CHECK(state_records == 2);
  CHECK(action_records == 1);

  PlanTrace back = parse_trace(text);
  CHECK(back == trace);
}

TEST_CASE("unverified flag survives the round trip") {
  PlanTrace trace = make_unstack_trace();
  trace.unverified = true;
  CHECK(parse_trace(serialize_trace(trace)) == trace);
}

TEST_CASE("randomized: multi step traces round trip bit exactly") {
  Domain bw = make_blocksworld();
  Problem p;
  p.objects = {"a", "b", "c"};
  p.init = state({"ontable(a)", "ontable(b)", "ontable(c)", "clear(a)", "clear(b)", "clear(c)",
                  "handempty"});
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    PlanTrace trace;
    trace.states.push_back(p.init);
    for (int step = 0; step < 5; ++step) {
      auto options = applicable_actions(trace.states.back(), bw, p.objects);
      REQUIRE(!options.empty());
      GroundAction a = options[rng.below(options.size())];
      trace.states.push_back(apply(a, trace.states.back()));
      trace.actions.push_back(std::move(a));
    }
    std::string text = serialize_trace(trace);
    PlanTrace back = parse_trace(text);
    CHECK(back == trace);
    CHECK(serialize_trace(back) == text);
  }
}

TEST_CASE("trace parsing rejects malformed input") {
  PlanTrace trace = make_unstack_trace();
  std::string text = serialize_trace(trace);
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);

  SUBCASE("empty input") { CHECK_THROWS_AS(parse_trace(""), ParseFailure); }
  SUBCASE("missing header") {
    CHECK_THROWS_AS(parse_trace(lines[1] + "\n" + lines[2] + "\n" + lines[3] + "\n"),
                    ParseFailure);
  }
  SUBCASE("broken json") {
    CHECK_THROWS_AS(parse_trace(lines[0] + "\n{not json\n"), ParseFailure);
  }
  SUBCASE("truncated after action") {
    CHECK_THROWS_AS(parse_trace(lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n"),
                    ParseFailure);
  }
  SUBCASE("action before any state") {
    CHECK_THROWS_AS(parse_trace(lines[0] + "\n" + lines[2] + "\n"), ParseFailure);
  }
  SUBCASE("two states in a row") {
    CHECK_THROWS_AS(parse_trace(lines[0] + "\n" + lines[1] + "\n" + lines[1] + "\n"),
                    ParseFailure);
  }
  SUBCASE("record of unknown shape") {
    CHECK_THROWS_AS(parse_trace(lines[0] + "\n{\"foo\":1}\n"), ParseFailure);
  }
  SUBCASE("error carries the line number") {
    try {
      parse_trace(lines[0] + "\n" + lines[1] + "\n{bad\n");
      FAIL("expected failure");
    } catch (const ParseFailure& e) {
      REQUIRE(e.errors().size() == 1);
      CHECK(e.errors()[0].span.line == 3);
    }
  }
}
