#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "prefplan/error.hpp"
#include "prefplan/pddl.hpp"

namespace prefplan::pddl {
namespace {

// =========================================================================
// Lexer / S-expressions
// =========================================================================

struct SExpr {
  bool is_list = false;
  std::string atom;
  std::vector<SExpr> items;
  SourceLocation loc;

  bool is_atom() const { return !is_list; }
};

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '-' || c == '_' || c == '?' || c == ':' || c == '.';
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  SExpr read_document() {
    skip_blank();
    if (pos_ >= text_.size()) throw ParseError(here(), "empty input");
    SExpr root = read();
    skip_blank();
    if (pos_ < text_.size()) throw ParseError(here(), "trailing content after top-level form");
    return root;
  }

 private:
  SourceLocation here() const { return {line_, col_}; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_blank() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  SExpr read() {
    skip_blank();
    if (pos_ >= text_.size()) throw ParseError(here(), "unexpected end of input");
    const char c = text_[pos_];
    SExpr e;
    e.loc = here();
    if (c == '(') {
      e.is_list = true;
      advance();
      for (;;) {
        skip_blank();
        if (pos_ >= text_.size()) throw ParseError(e.loc, "unmatched '('");
        if (text_[pos_] == ')') {
          advance();
          return e;
        }
        e.items.push_back(read());
      }
    }
    if (c == ')') throw ParseError(here(), "unexpected ')'");
    if (!is_word_char(c)) {
      throw ParseError(here(), std::string("lexical error: unexpected character '") + c + "'");
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_word_char(text_[pos_])) advance();
    if (pos_ < text_.size()) {
      const char n = text_[pos_];
      if (!std::isspace(static_cast<unsigned char>(n)) && n != '(' && n != ')' && n != ';') {
        throw ParseError(here(), std::string("lexical error: unexpected character '") + n + "'");
      }
    }
    e.atom = std::string(text_.substr(start, pos_ - start));
    return e;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

bool is_keyword(const SExpr& e, std::string_view kw) {
  return e.is_atom() && lower(e.atom) == kw;
}

const std::string& expect_atom(const SExpr& e, std::string_view what) {
  if (!e.is_atom()) throw ParseError(e.loc, "expected " + std::string(what));
  return e.atom;
}

void expect_list(const SExpr& e, std::string_view what) {
  if (!e.is_list) throw ParseError(e.loc, "expected " + std::string(what));
}

// `(head ...)` with a keyword head.
bool has_head(const SExpr& e, std::string_view kw) {
  return e.is_list && !e.items.empty() && is_keyword(e.items[0], kw);
}

void expect_identifier(const SExpr& e, std::string_view what) {
  const std::string& s = expect_atom(e, what);
  if (s.empty() || s[0] == '?' || s[0] == ':' || s == "-") {
    throw ParseError(e.loc, "expected " + std::string(what) + ", got '" + s + "'");
  }
}

struct TypedName {
  std::string name;
  std::string type;
  SourceLocation loc;
  SourceLocation type_loc;
};

// "a b - t1 c - t2 d" -> (a,t1) (b,t1) (c,t2) (d,object)
std::vector<TypedName> parse_typed_list(const std::vector<SExpr>& items, std::size_t begin) {
  std::vector<TypedName> out;
  std::vector<TypedName> pending;
  for (std::size_t i = begin; i < items.size(); ++i) {
    const SExpr& e = items[i];
    const std::string& tok = expect_atom(e, "name in typed list");
    if (tok == "-") {
      if (pending.empty()) throw ParseError(e.loc, "'-' without preceding names");
      if (i + 1 >= items.size()) throw ParseError(e.loc, "missing type after '-'");
      const SExpr& t = items[++i];
      if (has_head(t, "either")) throw ParseError(t.loc, "unknown keyword 'either' (not supported)");
      expect_identifier(t, "type name");
      for (auto& p : pending) {
        p.type = t.atom;
        p.type_loc = t.loc;
        out.push_back(std::move(p));
      }
      pending.clear();
      continue;
    }
    pending.push_back({tok, "object", e.loc, e.loc});
  }
  for (auto& p : pending) out.push_back(std::move(p));
  return out;
}

// =========================================================================
// Domain
// =========================================================================

void parse_types(const SExpr& section, TypeHierarchy& types) {
  const auto entries = parse_typed_list(section.items, 1);
  for (const auto& e : entries) {
    if (e.name == "object") continue;
    if (e.name[0] == '?' || e.name[0] == ':') throw ParseError(e.loc, "invalid type name '" + e.name + "'");
    if (types.find(e.name)) throw ParseError(e.loc, "duplicate type '" + e.name + "'");
    types.names.push_back(e.name);
    types.parent.push_back(0);
  }
  for (const auto& e : entries) {
    if (e.name == "object") continue;
    const auto child = *types.find(e.name);
    const auto parent = types.find(e.type);
    if (!parent) throw ParseError(e.type_loc, "undeclared type '" + e.type + "'");
    types.parent[child] = *parent;
  }
  for (int t = 0; t < types.size(); ++t) {
    int steps = 0;
    for (int p = types.parent[t]; p >= 0; p = types.parent[p]) {
      if (++steps > types.size()) throw ParseError(section.loc, "cyclic type hierarchy at '" + types.names[t] + "'");
    }
  }
}

int resolve_type(const TypeHierarchy& types, const std::string& name, SourceLocation loc) {
  const auto t = types.find(name);
  if (!t) throw ParseError(loc, "undeclared type '" + name + "'");
  return *t;
}

void parse_predicates(const SExpr& section, DomainDescription& domain) {
  for (std::size_t i = 1; i < section.items.size(); ++i) {
    const SExpr& decl = section.items[i];
    expect_list(decl, "predicate declaration");
    if (decl.items.empty()) throw ParseError(decl.loc, "empty predicate declaration");
    expect_identifier(decl.items[0], "predicate name");
    PredicateDecl p;
    p.name = decl.items[0].atom;
    if (domain.find_predicate(p.name)) throw ParseError(decl.loc, "duplicate predicate '" + p.name + "'");
    for (const auto& tn : parse_typed_list(decl.items, 1)) {
      if (tn.name.empty() || tn.name[0] != '?') throw ParseError(tn.loc, "predicate parameter must be a variable");
      p.params.push_back({tn.name, resolve_type(domain.types, tn.type, tn.type_loc)});
    }
    domain.predicates.push_back(std::move(p));
  }
}

SchemaLiteral parse_schema_literal(const SExpr& e, const DomainDescription& domain,
                                   const std::vector<TypedParam>& params) {
  SchemaLiteral lit;
  const SExpr* atom = &e;
  if (has_head(e, "not")) {
    if (e.items.size() != 2) throw ParseError(e.loc, "'not' takes exactly one argument");
    lit.positive = false;
    atom = &e.items[1];
  }
  expect_list(*atom, "literal");
  if (atom->items.empty()) throw ParseError(atom->loc, "empty literal");
  const SExpr& head = atom->items[0];
  expect_atom(head, "predicate name");
  if (head.atom[0] == ':') throw ParseError(head.loc, "unknown keyword '" + head.atom + "'");
  if (is_keyword(head, "and") || is_keyword(head, "or") || is_keyword(head, "forall") ||
      is_keyword(head, "exists") || is_keyword(head, "when") || is_keyword(head, "imply")) {
    throw ParseError(head.loc, "unknown keyword '" + head.atom + "' in literal position");
  }
  const auto pred = domain.find_predicate(head.atom);
  if (!pred) throw ParseError(head.loc, "undeclared predicate '" + head.atom + "'");
  lit.predicate = *pred;
  const auto& decl = domain.predicates[*pred];
  if (atom->items.size() - 1 != decl.arity()) {
    throw ParseError(atom->loc, "arity mismatch for '" + decl.name + "': expected " +
                                    std::to_string(decl.arity()) + ", got " +
                                    std::to_string(atom->items.size() - 1));
  }
  for (std::size_t k = 1; k < atom->items.size(); ++k) {
    const SExpr& arg = atom->items[k];
    const std::string& name = expect_atom(arg, "argument");
    if (name[0] != '?') throw ParseError(arg.loc, "constant '" + name + "' in action schema (only variables supported)");
    auto it = std::find_if(params.begin(), params.end(), [&](const TypedParam& p) { return p.name == name; });
    if (it == params.end()) throw ParseError(arg.loc, "unbound variable '" + name + "'");
    const int declared = decl.params[k - 1].type;
    if (!domain.types.is_subtype(it->type, declared)) {
      throw ParseError(arg.loc, "type mismatch: '" + name + "' is " + domain.types.names[it->type] + ", '" +
                                    decl.name + "' expects " + domain.types.names[declared]);
    }
    lit.args.push_back(static_cast<int>(it - params.begin()));
  }
  return lit;
}

template <typename LiteralT, typename ParseLiteral>
std::vector<LiteralT> parse_conjunction(const SExpr& e, ParseLiteral&& parse_literal) {
  std::vector<LiteralT> out;
  expect_list(e, "condition");
  if (e.items.empty()) return out;
  if (has_head(e, "and")) {
    for (std::size_t i = 1; i < e.items.size(); ++i) out.push_back(parse_literal(e.items[i]));
    return out;
  }
  if (e.items[0].is_atom()) {
    const std::string kw = lower(e.items[0].atom);
    if (kw == "or" || kw == "forall" || kw == "exists" || kw == "imply" || kw == "when" ||
        kw == "preference" || kw == "increase" || kw == "decrease") {
      throw ParseError(e.items[0].loc, "unknown keyword '" + e.items[0].atom + "' (not supported)");
    }
  }
  out.push_back(parse_literal(e));
  return out;
}

ActionSchema parse_action(const SExpr& section, const DomainDescription& domain) {
  if (section.items.size() < 2) throw ParseError(section.loc, "action without name");
  ActionSchema a;
  expect_identifier(section.items[1], "action name");
  a.name = section.items[1].atom;
  bool have_pre = false;
  bool have_eff = false;
  const SExpr* pre = nullptr;
  const SExpr* eff = nullptr;
  for (std::size_t i = 2; i < section.items.size(); i += 2) {
    const SExpr& key = section.items[i];
    expect_atom(key, "action keyword");
    if (i + 1 >= section.items.size()) throw ParseError(key.loc, "missing value for '" + key.atom + "'");
    const SExpr& val = section.items[i + 1];
    const std::string kw = lower(key.atom);
    if (kw == ":parameters") {
      expect_list(val, "parameter list");
      for (const auto& tn : parse_typed_list(val.items, 0)) {
        if (tn.name[0] != '?') throw ParseError(tn.loc, "parameter must be a variable");
        for (const auto& p : a.params) {
          if (p.name == tn.name) throw ParseError(tn.loc, "duplicate parameter '" + tn.name + "'");
        }
        a.params.push_back({tn.name, resolve_type(domain.types, tn.type, tn.type_loc)});
      }
    } else if (kw == ":precondition") {
      have_pre = true;
      pre = &val;
    } else if (kw == ":effect") {
      have_eff = true;
      eff = &val;
    } else {
      throw ParseError(key.loc, "unknown keyword '" + key.atom + "'");
    }
  }
  auto lit = [&](const SExpr& e) { return parse_schema_literal(e, domain, a.params); };
  if (have_pre) a.precondition = parse_conjunction<SchemaLiteral>(*pre, lit);
  if (have_eff) a.effect = parse_conjunction<SchemaLiteral>(*eff, lit);
  for (std::size_t i = 0; i < a.effect.size(); ++i) {
    for (std::size_t j = i + 1; j < a.effect.size(); ++j) {
      const auto& x = a.effect[i];
      const auto& y = a.effect[j];
      if (x.predicate == y.predicate && x.args == y.args && x.positive != y.positive) {
        throw ParseError(eff->loc, "contradictory effect on '" + domain.predicates[x.predicate].name +
                                       "' in action '" + a.name + "'");
      }
    }
  }
  return a;
}

// (define (domain NAME) ...) or (define (problem NAME) ...)
const SExpr& check_define(const SExpr& root, std::string_view kind, std::string& name) {
  if (!has_head(root, "define")) throw ParseError(root.loc, "expected (define ...)");
  if (root.items.size() < 2) throw ParseError(root.loc, "missing header in define");
  const SExpr& header = root.items[1];
  if (!has_head(header, kind) || header.items.size() != 2) {
    throw ParseError(header.loc, "expected (" + std::string(kind) + " <name>)");
  }
  expect_identifier(header.items[1], std::string(kind) + " name");
  name = header.items[1].atom;
  return header;
}

// =========================================================================
// Problem
// =========================================================================

struct ProblemContext {
  const DomainDescription& domain;
  Problem& problem;
};

PredicateAtom parse_ground_atom(const SExpr& e, const ProblemContext& ctx) {
  expect_list(e, "atom");
  if (e.items.empty()) throw ParseError(e.loc, "empty atom");
  const SExpr& head = e.items[0];
  expect_atom(head, "predicate name");
  if (head.atom[0] == ':') throw ParseError(head.loc, "unknown keyword '" + head.atom + "'");
  const auto pred = ctx.domain.find_predicate(head.atom);
  if (!pred) throw ParseError(head.loc, "undeclared predicate '" + head.atom + "'");
  const auto& decl = ctx.domain.predicates[*pred];
  if (e.items.size() - 1 != decl.arity()) {
    throw ParseError(e.loc, "arity mismatch for '" + decl.name + "': expected " + std::to_string(decl.arity()) +
                                ", got " + std::to_string(e.items.size() - 1));
  }
  PredicateAtom atom{*pred, {}};
  for (std::size_t k = 1; k < e.items.size(); ++k) {
    const SExpr& arg = e.items[k];
    const std::string& name = expect_atom(arg, "object name");
    if (name[0] == '?') throw ParseError(arg.loc, "unbound variable '" + name + "'");
    const auto obj = ctx.problem.find_object(name);
    if (!obj) throw ParseError(arg.loc, "undeclared object '" + name + "'");
    const int have = ctx.problem.objects[*obj].type;
    const int want = decl.params[k - 1].type;
    if (!ctx.domain.types.is_subtype(have, want)) {
      throw ParseError(arg.loc, "type mismatch: '" + name + "' is " + ctx.domain.types.names[have] + ", '" +
                                    decl.name + "' expects " + ctx.domain.types.names[want]);
    }
    atom.args.push_back(*obj);
  }
  return atom;
}

Literal parse_ground_literal(const SExpr& e, const ProblemContext& ctx) {
  bool positive = true;
  const SExpr* a = &e;
  if (has_head(e, "not")) {
    if (e.items.size() != 2) throw ParseError(e.loc, "'not' takes exactly one argument");
    positive = false;
    a = &e.items[1];
  }
  const PredicateAtom atom = parse_ground_atom(*a, ctx);
  return {*ctx.problem.atoms.find(atom), positive};
}

PreferenceConstraint parse_constraint_body(const SExpr& e, std::string name, const ProblemContext& ctx) {
  expect_list(e, "constraint");
  if (e.items.empty() || !e.items[0].is_atom()) throw ParseError(e.loc, "malformed constraint");
  const std::string kw = lower(e.items[0].atom);
  PreferenceConstraint c;
  c.name = std::move(name);
  if (kw == "at-end") {
    if (e.items.size() != 2) throw ParseError(e.loc, "malformed constraint: at-end takes one literal");
    c.payload = AtEnd{parse_ground_literal(e.items[1], ctx)};
  } else if (kw == "sometime-before") {
    if (e.items.size() != 3) throw ParseError(e.loc, "malformed constraint: sometime-before takes two literals");
    c.payload = SometimeBefore{parse_ground_literal(e.items[1], ctx), parse_ground_literal(e.items[2], ctx)};
  } else if (kw == "minimize-occurrences") {
    if (e.items.size() != 2 || !e.items[1].is_list || e.items[1].items.empty()) {
      throw ParseError(e.loc, "malformed constraint: minimize-occurrences takes a non-empty action list");
    }
    MinimizeOccurrences m;
    for (const auto& a : e.items[1].items) {
      const std::string& an = expect_atom(a, "action name");
      const auto idx = ctx.domain.find_action(an);
      if (!idx) throw ParseError(a.loc, "unknown action '" + an + "' in minimize-occurrences");
      if (std::find(m.actions.begin(), m.actions.end(), *idx) != m.actions.end()) {
        throw ParseError(a.loc, "duplicate action '" + an + "' in minimize-occurrences");
      }
      m.actions.push_back(*idx);
    }
    c.payload = std::move(m);
  } else {
    throw ParseError(e.items[0].loc, "malformed constraint: unknown form '" + e.items[0].atom + "'");
  }
  return c;
}

PreferenceConstraint parse_preference(const SExpr& e, const ProblemContext& ctx) {
  if (has_head(e, "preference")) {
    if (e.items.size() != 3) throw ParseError(e.loc, "malformed constraint: (preference <name> <constraint>)");
    expect_identifier(e.items[1], "preference name");
    return parse_constraint_body(e.items[2], e.items[1].atom, ctx);
  }
  return parse_constraint_body(e, "", ctx);
}

}  // namespace

// =========================================================================
// Public API
// =========================================================================

std::optional<int> TypeHierarchy::find(std::string_view name) const {
  for (int i = 0; i < size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

bool TypeHierarchy::is_subtype(int type, int ancestor) const {
  for (int t = type; t >= 0; t = parent[t]) {
    if (t == ancestor) return true;
  }
  return false;
}

std::optional<int> DomainDescription::find_predicate(std::string_view n) const {
  for (std::size_t i = 0; i < predicates.size(); ++i) {
    if (predicates[i].name == n) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<int> DomainDescription::find_action(std::string_view n) const {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i].name == n) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<int> Problem::find_object(std::string_view n) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].name == n) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::size_t Problem::count_objects_of_type(const TypeHierarchy& types, int type) const {
  return static_cast<std::size_t>(std::count_if(objects.begin(), objects.end(), [&](const Object& o) {
    return types.is_subtype(o.type, type);
  }));
}

DomainDescription parse_domain(std::string_view text) {
  const SExpr root = Reader(text).read_document();
  DomainDescription d;
  check_define(root, "domain", d.name);
  bool seen_predicates = false;
  bool seen_actions = false;
  for (std::size_t i = 2; i < root.items.size(); ++i) {
    const SExpr& s = root.items[i];
    expect_list(s, "domain section");
    if (s.items.empty() || !s.items[0].is_atom()) throw ParseError(s.loc, "malformed domain section");
    const std::string kw = lower(s.items[0].atom);
    if (kw == ":requirements") {
      for (std::size_t k = 1; k < s.items.size(); ++k) {
        const std::string& r = expect_atom(s.items[k], "requirement flag");
        if (r.empty() || r[0] != ':') throw ParseError(s.items[k].loc, "requirement must start with ':'");
        d.requirements.push_back(lower(r));
      }
    } else if (kw == ":types") {
      if (seen_predicates || seen_actions) throw ParseError(s.loc, ":types must precede predicates and actions");
      parse_types(s, d.types);
    } else if (kw == ":predicates") {
      if (seen_actions) throw ParseError(s.loc, ":predicates must precede actions");
      seen_predicates = true;
      parse_predicates(s, d);
    } else if (kw == ":action") {
      seen_actions = true;
      ActionSchema a = parse_action(s, d);
      if (d.find_action(a.name)) throw ParseError(s.loc, "duplicate action '" + a.name + "'");
      d.actions.push_back(std::move(a));
    } else {
      throw ParseError(s.items[0].loc, "unknown keyword '" + s.items[0].atom + "'");
    }
  }
  return d;
}

Problem parse_problem(std::string_view text, const DomainDescription& domain) {
  const SExpr root = Reader(text).read_document();
  Problem p;
  check_define(root, "problem", p.name);
  ProblemContext ctx{domain, p};
  bool atoms_ready = false;
  auto ensure_atoms = [&] {
    if (!atoms_ready) {
      p.atoms = AtomIndex(domain, p.objects);
      p.init = SymbolicState(p.atoms.size());
      atoms_ready = true;
    }
  };
  for (std::size_t i = 2; i < root.items.size(); ++i) {
    const SExpr& s = root.items[i];
    expect_list(s, "problem section");
    if (s.items.empty() || !s.items[0].is_atom()) throw ParseError(s.loc, "malformed problem section");
    const std::string kw = lower(s.items[0].atom);
    if (kw == ":domain") {
      if (s.items.size() != 2) throw ParseError(s.loc, "(:domain <name>) expected");
      p.domain_name = expect_atom(s.items[1], "domain name");
      if (p.domain_name != domain.name) {
        throw ParseError(s.items[1].loc, "problem targets domain '" + p.domain_name + "', loaded '" + domain.name + "'");
      }
    } else if (kw == ":objects") {
      if (atoms_ready) throw ParseError(s.loc, ":objects must precede :init, :goal and :constraints");
      for (const auto& tn : parse_typed_list(s.items, 1)) {
        if (tn.name[0] == '?' || tn.name[0] == ':') throw ParseError(tn.loc, "invalid object name '" + tn.name + "'");
        if (p.find_object(tn.name)) throw ParseError(tn.loc, "duplicate object '" + tn.name + "'");
        p.objects.push_back({tn.name, resolve_type(domain.types, tn.type, tn.type_loc)});
      }
    } else if (kw == ":init") {
      ensure_atoms();
      for (std::size_t k = 1; k < s.items.size(); ++k) {
        if (has_head(s.items[k], "not")) throw ParseError(s.items[k].loc, "negative literal in :init (closed world)");
        p.init.insert(*p.atoms.find(parse_ground_atom(s.items[k], ctx)));
      }
    } else if (kw == ":goal") {
      ensure_atoms();
      if (s.items.size() != 2) throw ParseError(s.loc, "(:goal <condition>) expected");
      p.goal = parse_conjunction<Literal>(s.items[1], [&](const SExpr& e) { return parse_ground_literal(e, ctx); });
    } else if (kw == ":constraints") {
      ensure_atoms();
      if (s.items.size() != 2) throw ParseError(s.loc, "(:constraints <constraint>) expected");
      const SExpr& body = s.items[1];
      if (has_head(body, "and")) {
        for (std::size_t k = 1; k < body.items.size(); ++k) p.constraints.push_back(parse_preference(body.items[k], ctx));
      } else {
        p.constraints.push_back(parse_preference(body, ctx));
      }
    } else {
      throw ParseError(s.items[0].loc, "unknown keyword '" + s.items[0].atom + "'");
    }
  }
  if (p.domain_name.empty()) throw ParseError(root.loc, "missing (:domain <name>)");
  ensure_atoms();
  return p;
}

namespace {
std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IO", "pddl-core", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(e.where(), path + ": " + e.detail());
  }
}
}  // namespace

DomainDescription load_domain(const std::string& path) {
  const std::string text = read_file(path);
  return with_path(path, [&] { return parse_domain(text); });
}

Problem load_problem(const std::string& path, const DomainDescription& domain) {
  const std::string text = read_file(path);
  return with_path(path, [&] { return parse_problem(text, domain); });
}

// =========================================================================
// Printing
// =========================================================================

namespace {

std::string schema_literal_to_string(const SchemaLiteral& l, const DomainDescription& d, const ActionSchema& a) {
  std::string s = "(" + d.predicates[l.predicate].name;
  for (int arg : l.args) s += " " + a.params[arg].name;
  s += ")";
  return l.positive ? s : "(not " + s + ")";
}

template <typename T, typename F>
std::string conjunction(const std::vector<T>& lits, F&& show) {
  if (lits.empty()) return "()";
  if (lits.size() == 1) return show(lits[0]);
  std::string s = "(and";
  for (const auto& l : lits) s += " " + show(l);
  return s + ")";
}

std::string typed_params(const std::vector<TypedParam>& params, const TypeHierarchy& types) {
  std::string s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) s += " ";
    s += params[i].name + " - " + types.names[params[i].type];
  }
  return s;
}

}  // namespace

std::string literal_to_string(const Literal& literal, const AtomIndex& atoms) {
  const std::string s = atoms.to_string(literal.atom);
  return literal.positive ? s : "(not " + s + ")";
}

std::string to_pddl(const DomainDescription& d) {
  std::ostringstream out;
  out << "(define (domain " << d.name << ")\n";
  if (!d.requirements.empty()) {
    out << "  (:requirements";
    for (const auto& r : d.requirements) out << " " << r;
    out << ")\n";
  }
  if (d.types.size() > 1) {
    out << "  (:types";
    for (int t = 1; t < d.types.size(); ++t) out << " " << d.types.names[t] << " - " << d.types.names[d.types.parent[t]];
    out << ")\n";
  }
  out << "  (:predicates";
  for (const auto& p : d.predicates) {
    out << "\n    (" << p.name;
    if (!p.params.empty()) out << " " << typed_params(p.params, d.types);
    out << ")";
  }
  out << ")\n";
  for (const auto& a : d.actions) {
    auto show = [&](const SchemaLiteral& l) { return schema_literal_to_string(l, d, a); };
    out << "  (:action " << a.name << "\n"
        << "    :parameters (" << typed_params(a.params, d.types) << ")\n"
        << "    :precondition " << conjunction(a.precondition, show) << "\n"
        << "    :effect " << conjunction(a.effect, show) << ")\n";
  }
  out << ")\n";
  return out.str();
}

std::string to_pddl(const Problem& p, const DomainDescription& d) {
  std::ostringstream out;
  auto lit = [&](const Literal& l) { return literal_to_string(l, p.atoms); };
  out << "(define (problem " << p.name << ")\n";
  out << "  (:domain " << p.domain_name << ")\n";
  out << "  (:objects";
  for (const auto& o : p.objects) out << "\n    " << o.name << " - " << d.types.names[o.type];
  out << ")\n";
  out << "  (:init";
  for (AtomId id : p.init.atoms()) out << "\n    " << p.atoms.to_string(id);
  out << ")\n";
  out << "  (:goal " << conjunction(p.goal, lit) << ")\n";
  if (!p.constraints.empty()) {
    out << "  (:constraints (and";
    for (const auto& c : p.constraints) {
      std::string body;
      if (const auto* ae = std::get_if<AtEnd>(&c.payload)) {
        body = "(at-end " + lit(ae->literal) + ")";
      } else if (const auto* sb = std::get_if<SometimeBefore>(&c.payload)) {
        body = "(sometime-before " + lit(sb->later) + " " + lit(sb->earlier) + ")";
      } else {
        const auto& m = std::get<MinimizeOccurrences>(c.payload);
        body = "(minimize-occurrences (";
        for (std::size_t i = 0; i < m.actions.size(); ++i) body += (i ? " " : "") + d.actions[m.actions[i]].name;
        body += "))";
      }
      out << "\n    ";
      if (c.name.empty()) {
        out << body;
      } else {
        out << "(preference " << c.name << " " << body << ")";
      }
    }
    out << "))\n";
  }
  out << ")\n";
  return out.str();
}

}  // namespace prefplan::pddl
