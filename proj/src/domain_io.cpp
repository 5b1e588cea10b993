#include "hwm/domain_io.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hwm::io {

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::UnexpectedToken: return "unexpected-token";
    case ParseErrorKind::UnknownPredicate: return "unknown-predicate";
    case ParseErrorKind::UnknownName: return "unknown-name";
    case ParseErrorKind::ArityMismatch: return "arity-mismatch";
    case ParseErrorKind::UnboundVariable: return "unbound-variable";
    case ParseErrorKind::DuplicateName: return "duplicate-name";
  }
  return "unknown";
}

std::string ParseError::format() const {
  std::ostringstream os;
  os << span.line << ':' << span.column << ": " << to_string(kind) << ": " << message;
  return os.str();
}

ParseFailure::ParseFailure(std::vector<ParseError> errors)
    : std::runtime_error(errors.empty() ? "parse failed" : errors.front().format()),
      errors_(std::move(errors)) {}

namespace {

struct Token {
  enum Kind { LParen, RParen, Symbol, End } kind = End;
  std::string text;  // lowercased
  SourceSpan span;
};

std::vector<Token> tokenize(const std::string& text, std::vector<ParseError>& errors) {
  std::vector<Token> tokens;
  int line = 1, col = 1;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++col;
      ++i;
      continue;
    }
    if (c == ';') {  // comment to end of line
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (c == '(' || c == ')') {
      tokens.push_back({c == '(' ? Token::LParen : Token::RParen, std::string(1, c),
                        {line, col, 1}});
      ++col;
      ++i;
      continue;
    }
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '?' || c == ':' || c == '-' ||
        c == '_' || c == '=') {
      int start_col = col;
      std::string sym;
      while (i < text.size()) {
        char d = text[i];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '?' || d == ':' || d == '-' ||
            d == '_' || d == '=') {
          sym += static_cast<char>(std::tolower(static_cast<unsigned char>(d)));
          ++i;
          ++col;
        } else {
          break;
        }
      }
      tokens.push_back({Token::Symbol, sym, {line, start_col, static_cast<int>(sym.size())}});
      continue;
    }
    errors.push_back({{line, col, 1},
                      ParseErrorKind::UnexpectedToken,
                      std::string("stray character '") + c + "'"});
    ++col;
    ++i;
  }
  tokens.push_back({Token::End, "", {line, col, 1}});
  return tokens;
}

struct Sexp {
  bool is_list = false;
  Token tok;                // leaf token, or the '(' of a list
  std::vector<Sexp> items;  // list children
};

// Thrown on structural errors that prevent further reading.
struct Abort {};

class Reader {
 public:
  Reader(const std::vector<Token>& tokens, std::vector<ParseError>& errors)
      : tokens_(tokens), errors_(errors) {}

  Sexp read() {
    const Token& t = tokens_[pos_];
    if (t.kind == Token::LParen) {
      Sexp list;
      list.is_list = true;
      list.tok = t;
      ++pos_;
      while (tokens_[pos_].kind != Token::RParen) {
        if (tokens_[pos_].kind == Token::End) {
          fail(tokens_[pos_].span, "missing ')' before end of input");
        }
        list.items.push_back(read());
      }
      ++pos_;  // consume ')'
      return list;
    }
    if (t.kind == Token::Symbol) {
      Sexp leaf;
      leaf.tok = t;
      ++pos_;
      return leaf;
    }
    fail(t.span, t.kind == Token::RParen ? "unmatched ')'" : "unexpected end of input");
    return {};
  }

  bool at_end() const { return tokens_[pos_].kind == Token::End; }
  const Token& current() const { return tokens_[pos_]; }

  [[noreturn]] void fail(const SourceSpan& span, const std::string& message) {
    errors_.push_back({span, ParseErrorKind::UnexpectedToken, message});
    throw Abort{};
  }

 private:
  const std::vector<Token>& tokens_;
  std::vector<ParseError>& errors_;
  size_t pos_ = 0;
};

class Collector {
 public:
  void add(const SourceSpan& span, ParseErrorKind kind, const std::string& message) {
    errors.push_back({span, kind, message});
  }
  std::vector<ParseError> errors;
};

bool is_variable(const std::string& s) { return !s.empty() && s[0] == '?'; }

const Sexp* find_section(const Sexp& root, const std::string& keyword) {
  for (const auto& item : root.items) {
    if (item.is_list && !item.items.empty() && !item.items[0].is_list &&
        item.items[0].tok.text == keyword) {
      return &item;
    }
  }
  return nullptr;
}

// Flattens an atom / (and ...) / (not atom) formula into positive and
// (when allow_not) negated atom lists, validating against the domain.
struct LiftedFormula {
  std::vector<SchemaAtom> atoms;
  std::vector<SchemaAtom> negated;
};

void parse_lifted_atom(const Sexp& node, const Domain& domain,
                       const std::set<std::string>& params, Collector& col,
                       std::vector<SchemaAtom>& out) {
  if (!node.is_list || node.items.empty() || node.items[0].is_list) {
    col.add(node.tok.span, ParseErrorKind::UnexpectedToken, "expected an atom");
    return;
  }
  const Token& head = node.items[0].tok;
  const Predicate* pred = domain.find_predicate(head.text);
  if (pred == nullptr) {
    col.add(head.span, ParseErrorKind::UnknownPredicate,
            "predicate '" + head.text + "' is not declared");
    return;
  }
  if (static_cast<int>(node.items.size()) - 1 != pred->arity) {
    col.add(head.span, ParseErrorKind::ArityMismatch,
            "predicate '" + head.text + "' expects " + std::to_string(pred->arity) +
                " arguments, got " + std::to_string(node.items.size() - 1));
    return;
  }
  SchemaAtom atom;
  atom.predicate = head.text;
  bool ok = true;
  for (size_t i = 1; i < node.items.size(); ++i) {
    const Sexp& arg = node.items[i];
    if (arg.is_list) {
      col.add(arg.tok.span, ParseErrorKind::UnexpectedToken, "expected a variable");
      ok = false;
      continue;
    }
    if (params.find(arg.tok.text) == params.end()) {
      col.add(arg.tok.span, ParseErrorKind::UnboundVariable,
              "'" + arg.tok.text + "' is not bound in :parameters");
      ok = false;
      continue;
    }
    atom.vars.push_back(arg.tok.text);
  }
  if (ok) out.push_back(std::move(atom));
}

LiftedFormula parse_lifted_formula(const Sexp& node, const Domain& domain,
                                   const std::set<std::string>& params, bool allow_not,
                                   Collector& col) {
  LiftedFormula formula;
  if (!node.is_list || node.items.empty()) {
    col.add(node.tok.span, ParseErrorKind::UnexpectedToken, "expected a formula");
    return formula;
  }
  const std::string& head = node.items[0].is_list ? "" : node.items[0].tok.text;
  if (head == "and") {
    for (size_t i = 1; i < node.items.size(); ++i) {
      LiftedFormula sub = parse_lifted_formula(node.items[i], domain, params, allow_not, col);
      for (auto& a : sub.atoms) formula.atoms.push_back(std::move(a));
      for (auto& a : sub.negated) formula.negated.push_back(std::move(a));
    }
    return formula;
  }
  if (head == "not") {
    if (!allow_not) {
      col.add(node.items[0].tok.span, ParseErrorKind::UnexpectedToken,
              "'not' is only allowed inside :effect");
      return formula;
    }
    if (node.items.size() != 2) {
      col.add(node.items[0].tok.span, ParseErrorKind::UnexpectedToken,
              "'not' takes exactly one atom");
      return formula;
    }
    parse_lifted_atom(node.items[1], domain, params, col, formula.negated);
    return formula;
  }
  parse_lifted_atom(node, domain, params, col, formula.atoms);
  return formula;
}

void parse_action(const Sexp& node, Domain& domain, std::set<std::string>& action_names,
                  Collector& col) {
  // (:action name :parameters (...) [:precondition F] :effect F)
  if (node.items.size() < 2 || node.items[1].is_list) {
    col.add(node.tok.span, ParseErrorKind::UnexpectedToken, ":action requires a name");
    return;
  }
  ActionSchema schema;
  schema.name = node.items[1].tok.text;
  if (!action_names.insert(schema.name).second) {
    col.add(node.items[1].tok.span, ParseErrorKind::DuplicateName,
            "action '" + schema.name + "' is declared twice");
    return;
  }

  std::set<std::string> params;
  const Sexp* precondition = nullptr;
  const Sexp* effect = nullptr;
  bool saw_parameters = false;
  for (size_t i = 2; i < node.items.size(); ++i) {
    const Sexp& key = node.items[i];
    if (key.is_list || key.tok.text.empty() || key.tok.text[0] != ':') {
      col.add(key.tok.span, ParseErrorKind::UnexpectedToken, "expected a section keyword");
      return;
    }
    if (i + 1 >= node.items.size()) {
      col.add(key.tok.span, ParseErrorKind::UnexpectedToken,
              "section '" + key.tok.text + "' has no body");
      return;
    }
    const Sexp& body = node.items[++i];
    if (key.tok.text == ":parameters") {
      saw_parameters = true;
      if (!body.is_list) {
        col.add(body.tok.span, ParseErrorKind::UnexpectedToken,
                ":parameters expects a variable list");
        continue;
      }
      for (const auto& p : body.items) {
        if (p.is_list || !is_variable(p.tok.text)) {
          col.add(p.tok.span, ParseErrorKind::UnexpectedToken,
                  "parameters must be '?' variables");
          continue;
        }
        if (!params.insert(p.tok.text).second) {
          col.add(p.tok.span, ParseErrorKind::DuplicateName,
                  "parameter '" + p.tok.text + "' is declared twice");
          continue;
        }
        schema.params.push_back(p.tok.text);
      }
    } else if (key.tok.text == ":precondition") {
      precondition = &body;
    } else if (key.tok.text == ":effect") {
      effect = &body;
    } else {
      col.add(key.tok.span, ParseErrorKind::UnexpectedToken,
              "unsupported section '" + key.tok.text + "'");
    }
  }
  if (!saw_parameters) {
    col.add(node.items[1].tok.span, ParseErrorKind::UnexpectedToken,
            "action '" + schema.name + "' is missing :parameters");
    return;
  }
  if (effect == nullptr) {
    col.add(node.items[1].tok.span, ParseErrorKind::UnexpectedToken,
            "action '" + schema.name + "' is missing :effect");
    return;
  }
  if (precondition != nullptr) {
    LiftedFormula pre = parse_lifted_formula(*precondition, domain, params, false, col);
    schema.pre = std::move(pre.atoms);
  }
  LiftedFormula eff = parse_lifted_formula(*effect, domain, params, true, col);
  schema.add = std::move(eff.atoms);
  schema.del = std::move(eff.negated);
  domain.schemas.push_back(std::move(schema));
}

GroundAtom parse_ground_atom(const Sexp& node, const Domain& domain,
                             const std::set<std::string>& objects, Collector& col, bool& ok) {
  ok = false;
  if (!node.is_list || node.items.empty() || node.items[0].is_list) {
    col.add(node.tok.span, ParseErrorKind::UnexpectedToken, "expected a ground atom");
    return {};
  }
  const Token& head = node.items[0].tok;
  const Predicate* pred = domain.find_predicate(head.text);
  if (pred == nullptr) {
    col.add(head.span, ParseErrorKind::UnknownPredicate,
            "predicate '" + head.text + "' is not declared");
    return {};
  }
  if (static_cast<int>(node.items.size()) - 1 != pred->arity) {
    col.add(head.span, ParseErrorKind::ArityMismatch,
            "predicate '" + head.text + "' expects " + std::to_string(pred->arity) +
                " arguments, got " + std::to_string(node.items.size() - 1));
    return {};
  }
  GroundAtom atom;
  atom.predicate = head.text;
  bool good = true;
  for (size_t i = 1; i < node.items.size(); ++i) {
    const Sexp& arg = node.items[i];
    if (arg.is_list || is_variable(arg.tok.text)) {
      col.add(arg.tok.span, ParseErrorKind::UnexpectedToken, "expected an object name");
      good = false;
      continue;
    }
    if (objects.find(arg.tok.text) == objects.end()) {
      col.add(arg.tok.span, ParseErrorKind::UnknownName,
              "object '" + arg.tok.text + "' is not declared");
      good = false;
      continue;
    }
    atom.args.push_back(arg.tok.text);
  }
  ok = good;
  return atom;
}

Sexp read_root(const std::string& text, std::vector<ParseError>& errors) {
  std::vector<Token> tokens = tokenize(text, errors);
  Reader reader(tokens, errors);
  Sexp root = reader.read();
  if (!reader.at_end()) {
    reader.fail(reader.current().span, "trailing input after top-level form");
  }
  if (!root.is_list || root.items.empty() || root.items[0].is_list ||
      root.items[0].tok.text != "define") {
    errors.push_back(
        {root.tok.span, ParseErrorKind::UnexpectedToken, "expected (define ...)"});
    throw Abort{};
  }
  return root;
}

}  // namespace

Domain parse_domain(const std::string& text) {
  Collector col;
  Domain domain;
  try {
    Sexp root = read_root(text, col.errors);
    if (root.items.size() < 2 || !root.items[1].is_list || root.items[1].items.size() != 2 ||
        root.items[1].items[0].is_list || root.items[1].items[0].tok.text != "domain") {
      col.add(root.tok.span, ParseErrorKind::UnexpectedToken, "expected (domain <name>)");
      throw Abort{};
    }
    domain.name = root.items[1].items[1].tok.text;

    const Sexp* preds = find_section(root, ":predicates");
    if (preds != nullptr) {
      std::set<std::string> names;
      for (size_t i = 1; i < preds->items.size(); ++i) {
        const Sexp& decl = preds->items[i];
        if (!decl.is_list || decl.items.empty() || decl.items[0].is_list) {
          col.add(decl.tok.span, ParseErrorKind::UnexpectedToken,
                  "expected a predicate declaration");
          continue;
        }
        Predicate p;
        p.name = decl.items[0].tok.text;
        p.arity = static_cast<int>(decl.items.size()) - 1;
        if (!names.insert(p.name).second) {
          col.add(decl.items[0].tok.span, ParseErrorKind::DuplicateName,
                  "predicate '" + p.name + "' is declared twice");
          continue;
        }
        domain.predicates.push_back(std::move(p));
      }
    }
    std::sort(domain.predicates.begin(), domain.predicates.end());

    std::set<std::string> action_names;
    for (const auto& item : root.items) {
      if (item.is_list && !item.items.empty() && !item.items[0].is_list &&
          item.items[0].tok.text == ":action") {
        parse_action(item, domain, action_names, col);
      }
    }
    std::sort(domain.schemas.begin(), domain.schemas.end(),
              [](const ActionSchema& a, const ActionSchema& b) { return a.name < b.name; });
  } catch (const Abort&) {
    // structural error already recorded
  }
  if (!col.errors.empty()) throw ParseFailure(std::move(col.errors));
  return domain;
}

Problem parse_problem(const std::string& text, const Domain& domain) {
  Collector col;
  Problem problem;
  try {
    Sexp root = read_root(text, col.errors);
    if (root.items.size() < 2 || !root.items[1].is_list || root.items[1].items.size() != 2 ||
        root.items[1].items[0].is_list || root.items[1].items[0].tok.text != "problem") {
      col.add(root.tok.span, ParseErrorKind::UnexpectedToken, "expected (problem <name>)");
      throw Abort{};
    }
    problem.name = root.items[1].items[1].tok.text;

    const Sexp* dom = find_section(root, ":domain");
    if (dom != nullptr && dom->items.size() == 2 && !dom->items[1].is_list &&
        dom->items[1].tok.text != domain.name) {
      col.add(dom->items[1].tok.span, ParseErrorKind::UnknownName,
              "problem references domain '" + dom->items[1].tok.text + "', expected '" +
                  domain.name + "'");
    }

    std::set<std::string> objects;
    const Sexp* objs = find_section(root, ":objects");
    if (objs != nullptr) {
      for (size_t i = 1; i < objs->items.size(); ++i) {
        const Sexp& o = objs->items[i];
        if (o.is_list || is_variable(o.tok.text)) {
          col.add(o.tok.span, ParseErrorKind::UnexpectedToken, "expected an object name");
          continue;
        }
        if (!objects.insert(o.tok.text).second) {
          col.add(o.tok.span, ParseErrorKind::DuplicateName,
                  "object '" + o.tok.text + "' is declared twice");
        }
      }
    }
    problem.objects.assign(objects.begin(), objects.end());

    const Sexp* init = find_section(root, ":init");
    AtomSet init_atoms;
    if (init != nullptr) {
      for (size_t i = 1; i < init->items.size(); ++i) {
        bool ok = false;
        GroundAtom atom = parse_ground_atom(init->items[i], domain, objects, col, ok);
        if (ok) init_atoms.push_back(std::move(atom));
      }
    }
    problem.init = LogicalState(std::move(init_atoms));

    const Sexp* goal = find_section(root, ":goal");
    if (goal != nullptr) {
      if (goal->items.size() != 2) {
        col.add(goal->items[0].tok.span, ParseErrorKind::UnexpectedToken,
                ":goal expects a single formula");
      } else {
        const Sexp& body = goal->items[1];
        std::vector<const Sexp*> atoms;
        if (body.is_list && !body.items.empty() && !body.items[0].is_list &&
            body.items[0].tok.text == "and") {
          for (size_t i = 1; i < body.items.size(); ++i) atoms.push_back(&body.items[i]);
        } else {
          atoms.push_back(&body);
        }
        for (const Sexp* a : atoms) {
          bool ok = false;
          GroundAtom atom = parse_ground_atom(*a, domain, objects, col, ok);
          if (ok) problem.goal.push_back(std::move(atom));
        }
        normalize_atoms(problem.goal);
      }
    }
  } catch (const Abort&) {
  }
  if (!col.errors.empty()) throw ParseFailure(std::move(col.errors));
  return problem;
}

namespace {

std::string lifted_atom_text(const SchemaAtom& atom) {
  std::string out = "(" + atom.predicate;
  for (const auto& v : atom.vars) out += " " + v;
  out += ")";
  return out;
}

std::string ground_atom_text(const GroundAtom& atom) {
  std::string out = "(" + atom.predicate;
  for (const auto& a : atom.args) out += " " + a;
  out += ")";
  return out;
}

}  // namespace

std::string serialize_domain(const Domain& domain) {
  std::ostringstream os;
  os << "(define (domain " << domain.name << ")\n";
  os << "  (:predicates";
  for (const auto& p : domain.predicates) {
    os << " (" << p.name;
    for (int i = 0; i < p.arity; ++i) os << " ?x" << i;
    os << ")";
  }
  os << ")\n";
  for (const auto& schema : domain.schemas) {
    os << "  (:action " << schema.name << "\n    :parameters (";
    for (size_t i = 0; i < schema.params.size(); ++i) {
      if (i) os << " ";
      os << schema.params[i];
    }
    os << ")\n";
    os << "    :precondition (and";
    for (const auto& a : schema.pre) os << " " << lifted_atom_text(a);
    os << ")\n";
    os << "    :effect (and";
    for (const auto& a : schema.add) os << " " << lifted_atom_text(a);
    for (const auto& a : schema.del) os << " (not " << lifted_atom_text(a) << ")";
    os << "))\n";
  }
  os << ")\n";
  return os.str();
}

std::string serialize_problem(const Problem& problem, const Domain& domain) {
  std::ostringstream os;
  os << "(define (problem " << problem.name << ")\n";
  os << "  (:domain " << domain.name << ")\n";
  os << "  (:objects";
  for (const auto& o : problem.objects) os << " " << o;
  os << ")\n";
  os << "  (:init";
  for (const auto& a : problem.init.atoms()) os << " " << ground_atom_text(a);
  os << ")\n";
  os << "  (:goal (and";
  for (const auto& a : problem.goal) os << " " << ground_atom_text(a);
  os << ")))\n";
  return os.str();
}

std::string serialize_trace(const PlanTrace& trace) {
  using nlohmann::json;
  std::ostringstream os;
  json header;
  header["format"] = "hwm-trace";
  header["unverified"] = trace.unverified;
  header["version"] = 1;
  os << header.dump() << '\n';
  for (size_t m = 0; m < trace.states.size(); ++m) {
    if (m > 0) {
      const GroundAction& a = trace.actions[m - 1];
      json rec;
      rec["action"] = a.name;
      rec["bound_args"] = a.binding;
      json pre = json::array(), add = json::array(), del = json::array();
      for (const auto& atom : a.pre) pre.push_back(atom.str());
      for (const auto& atom : a.add) add.push_back(atom.str());
      for (const auto& atom : a.del) del.push_back(atom.str());
      rec["pre"] = std::move(pre);
      rec["add"] = std::move(add);
      rec["del"] = std::move(del);
      rec["step"] = m;
      os << rec.dump() << '\n';
    }
    json rec;
    json atoms = json::array();
    for (const auto& atom : trace.states[m].atoms()) atoms.push_back(atom.str());
    rec["state_atoms"] = std::move(atoms);
    rec["step"] = m;
    os << rec.dump() << '\n';
  }
  return os.str();
}

PlanTrace parse_trace(const std::string& text) {
  using nlohmann::json;
  std::vector<ParseError> errors;
  auto fail = [&errors](int line, const std::string& message) {
    errors.push_back({{line, 1, 1}, ParseErrorKind::UnexpectedToken, message});
    throw ParseFailure(std::move(errors));
  };

  PlanTrace trace;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  bool expect_state = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(lineno, std::string("bad JSON record: ") + e.what());
    }
    if (!saw_header) {
      if (!rec.is_object() || rec.value("format", "") != "hwm-trace") {
        fail(lineno, "missing hwm-trace header");
      }
      trace.unverified = rec.value("unverified", false);
      saw_header = true;
      continue;
    }
    if (rec.contains("state_atoms")) {
      if (!expect_state) fail(lineno, "state record where an action was expected");
      AtomSet atoms;
      for (const auto& s : rec["state_atoms"]) atoms.push_back(GroundAtom::parse(s));
      trace.states.emplace_back(std::move(atoms));
      expect_state = false;
    } else if (rec.contains("action")) {
      if (expect_state) fail(lineno, "action record where a state was expected");
      GroundAction a;
      a.name = rec["action"];
      for (const auto& s : rec["bound_args"]) a.binding.push_back(s);
      for (const auto& s : rec.value("pre", json::array())) a.pre.push_back(GroundAtom::parse(s));
      for (const auto& s : rec.value("add", json::array())) a.add.push_back(GroundAtom::parse(s));
      for (const auto& s : rec.value("del", json::array())) a.del.push_back(GroundAtom::parse(s));
      normalize_atoms(a.pre);
      normalize_atoms(a.add);
      normalize_atoms(a.del);
      trace.actions.push_back(std::move(a));
      expect_state = true;
    } else {
      fail(lineno, "record is neither a state nor an action");
    }
  }
  if (!saw_header) fail(lineno + 1, "empty input, expected hwm-trace header");
  if (!trace.states.empty() && trace.states.size() != trace.actions.size() + 1) {
    fail(lineno + 1, "truncated trace: action without a following state");
  }
  if (trace.states.empty() && !trace.actions.empty()) {
    fail(lineno + 1, "trace has actions but no states");
  }
  return trace;
}

}  // namespace hwm::io
