#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace prefplan::pddl {

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

// Type 0 is always the implicit root "object".
struct TypeHierarchy {
  std::vector<std::string> names{"object"};
  std::vector<int> parent{-1};

  std::optional<int> find(std::string_view name) const;
  bool is_subtype(int type, int ancestor) const;
  int size() const { return static_cast<int>(names.size()); }

  bool operator==(const TypeHierarchy&) const = default;
};

struct TypedParam {
  std::string name;  // "?r" for variables, object name for objects
  int type = 0;

  bool operator==(const TypedParam&) const = default;
};

struct PredicateDecl {
  std::string name;
  std::vector<TypedParam> params;

  std::size_t arity() const { return params.size(); }
  bool operator==(const PredicateDecl&) const = default;
};

// A literal inside an action schema; args index the schema's parameters.
struct SchemaLiteral {
  int predicate = 0;
  std::vector<int> args;
  bool positive = true;

  bool operator==(const SchemaLiteral&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<TypedParam> params;
  std::vector<SchemaLiteral> precondition;
  std::vector<SchemaLiteral> effect;

  bool operator==(const ActionSchema&) const = default;
};

struct DomainDescription {
  std::string name;
  std::vector<std::string> requirements;
  TypeHierarchy types;
  std::vector<PredicateDecl> predicates;
  std::vector<ActionSchema> actions;

  std::optional<int> find_predicate(std::string_view name) const;
  std::optional<int> find_action(std::string_view name) const;

  bool operator==(const DomainDescription&) const = default;
};

// ---------------------------------------------------------------------------
// Ground atoms and states
// ---------------------------------------------------------------------------

using AtomId = std::uint32_t;

struct PredicateAtom {
  int predicate = 0;
  std::vector<int> args;  // object indices

  bool operator==(const PredicateAtom&) const = default;
};

struct Object {
  std::string name;
  int type = 0;

  bool operator==(const Object&) const = default;
};

// Dense numbering of every type-consistent grounding of every predicate.
class AtomIndex {
 public:
  AtomIndex() = default;
  AtomIndex(const DomainDescription& domain, const std::vector<Object>& objects);

  std::size_t size() const { return atoms_.size(); }
  const PredicateAtom& atom(AtomId id) const { return atoms_[id]; }
  std::optional<AtomId> find(const PredicateAtom& atom) const;
  std::string to_string(AtomId id) const;

  bool operator==(const AtomIndex& other) const { return atoms_ == other.atoms_; }

 private:
  std::vector<PredicateAtom> atoms_;
  std::vector<std::size_t> offsets_;              // first id per predicate
  std::vector<std::vector<std::size_t>> strides_;  // per predicate, per argument
  std::vector<std::vector<std::vector<int>>> position_;  // per predicate/arg: object -> rank or -1
  std::vector<std::string> predicate_names_;
  std::vector<std::string> object_names_;
};

// Closed-world state: the set of true ground atoms, stored as a bitset over
// the problem's AtomIndex.
class SymbolicState {
 public:
  SymbolicState() = default;
  explicit SymbolicState(std::size_t atom_count) : words_((atom_count + 63) / 64, 0) {}

  bool contains(AtomId id) const { return (words_[id >> 6U] >> (id & 63U)) & 1U; }
  void insert(AtomId id) { words_[id >> 6U] |= (std::uint64_t{1} << (id & 63U)); }
  void erase(AtomId id) { words_[id >> 6U] &= ~(std::uint64_t{1} << (id & 63U)); }
  std::size_t count() const;
  std::vector<AtomId> atoms() const;
  std::size_t hash() const;

  bool operator==(const SymbolicState&) const = default;

 private:
  std::vector<std::uint64_t> words_;
};

struct StateHash {
  std::size_t operator()(const SymbolicState& s) const { return s.hash(); }
};

struct Literal {
  AtomId atom = 0;
  bool positive = true;

  bool operator==(const Literal&) const = default;
};

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

enum class ConstraintKind { AtEnd, SometimeBefore, MinimizeOccurrences };

struct AtEnd {
  Literal literal;
  bool operator==(const AtEnd&) const = default;
};

// PDDL3 argument order: (sometime-before <later> <earlier>). The constraint
// holds when `earlier` is true in some state strictly before the first state
// in which `later` is true.
struct SometimeBefore {
  Literal later;
  Literal earlier;
  bool operator==(const SometimeBefore&) const = default;
};

struct MinimizeOccurrences {
  std::vector<int> actions;  // schema indices
  bool operator==(const MinimizeOccurrences&) const = default;
};

struct PreferenceConstraint {
  std::string name;  // preference name; several constraints may share one
  std::variant<AtEnd, SometimeBefore, MinimizeOccurrences> payload;

  ConstraintKind kind() const { return static_cast<ConstraintKind>(payload.index()); }
  bool operator==(const PreferenceConstraint&) const = default;
};

struct Problem {
  std::string name;
  std::string domain_name;
  std::vector<Object> objects;
  AtomIndex atoms;
  SymbolicState init;
  std::vector<Literal> goal;
  std::vector<PreferenceConstraint> constraints;

  std::optional<int> find_object(std::string_view name) const;
  std::size_t count_objects_of_type(const TypeHierarchy& types, int type) const;

  bool operator==(const Problem&) const = default;
};

// ---------------------------------------------------------------------------
// Parsing and printing
// ---------------------------------------------------------------------------

// Throws ParseError (with line/column) on any lexical, syntactic or
// semantic violation of the supported subset.
DomainDescription parse_domain(std::string_view text);
Problem parse_problem(std::string_view text, const DomainDescription& domain);

DomainDescription load_domain(const std::string& path);
Problem load_problem(const std::string& path, const DomainDescription& domain);

std::string to_pddl(const DomainDescription& domain);
std::string to_pddl(const Problem& problem, const DomainDescription& domain);

std::string literal_to_string(const Literal& literal, const AtomIndex& atoms);

// ---------------------------------------------------------------------------
// Grounding and transitions
// ---------------------------------------------------------------------------

struct GroundAction {
  int schema = 0;
  std::vector<int> args;  // object indices
  std::string name;       // "(pick apple fridge)"
  std::vector<Literal> precondition;
  std::vector<AtomId> add;
  std::vector<AtomId> del;

  bool operator==(const GroundAction&) const = default;
};

// All type-consistent instantiations, ordered by schema name then argument
// names (lexicographic).
std::vector<GroundAction> ground_actions(const DomainDescription& domain, const Problem& problem);

bool holds(const SymbolicState& state, const Literal& literal);
bool check_goal(const SymbolicState& state, const Problem& problem);
bool applicable(const SymbolicState& state, const GroundAction& action);

// Throws PreconditionViolated naming the first failing literal.
SymbolicState apply_action(const SymbolicState& state, const GroundAction& action,
                           const AtomIndex& atoms);

// Domain, problem and their groundings bundled together; immutable after
// construction.
struct Task {
  DomainDescription domain;
  Problem problem;
  std::vector<GroundAction> actions;

  Task(DomainDescription d, Problem p);

  std::optional<std::size_t> find_action(std::string_view name) const;
  SymbolicState apply(const SymbolicState& state, std::size_t action) const {
    return apply_action(state, actions[action], problem.atoms);
  }
};

}  // namespace prefplan::pddl
