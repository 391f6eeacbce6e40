#include <algorithm>
#include <bit>

#include "prefplan/error.hpp"
#include "prefplan/pddl.hpp"

namespace prefplan::pddl {

// ---------------------------------------------------------------------------
// AtomIndex
// ---------------------------------------------------------------------------

AtomIndex::AtomIndex(const DomainDescription& domain, const std::vector<Object>& objects) {
  for (const auto& o : objects) object_names_.push_back(o.name);
  for (std::size_t p = 0; p < domain.predicates.size(); ++p) {
    const auto& decl = domain.predicates[p];
    predicate_names_.push_back(decl.name);
    offsets_.push_back(atoms_.size());
    std::vector<std::vector<int>> cands;
    std::vector<std::vector<int>> pos;
    for (const auto& param : decl.params) {
      std::vector<int> c;
      std::vector<int> rank(objects.size(), -1);
      for (std::size_t o = 0; o < objects.size(); ++o) {
        if (domain.types.is_subtype(objects[o].type, param.type)) {
          rank[o] = static_cast<int>(c.size());
          c.push_back(static_cast<int>(o));
        }
      }
      cands.push_back(std::move(c));
      pos.push_back(std::move(rank));
    }
    // Row-major strides, last argument fastest.
    std::vector<std::size_t> strides(decl.arity(), 1);
    std::size_t total = 1;
    for (std::size_t k = decl.arity(); k-- > 0;) {
      strides[k] = total;
      total *= cands[k].size();
    }
    for (std::size_t flat = 0; flat < total; ++flat) {
      PredicateAtom a{static_cast<int>(p), {}};
      for (std::size_t k = 0; k < decl.arity(); ++k) a.args.push_back(cands[k][(flat / strides[k]) % cands[k].size()]);
      atoms_.push_back(std::move(a));
    }
    position_.push_back(std::move(pos));
    strides_.push_back(std::move(strides));
  }
}

std::optional<AtomId> AtomIndex::find(const PredicateAtom& atom) const {
  if (atom.predicate < 0 || static_cast<std::size_t>(atom.predicate) >= offsets_.size()) return std::nullopt;
  const auto p = static_cast<std::size_t>(atom.predicate);
  if (atom.args.size() != strides_[p].size()) return std::nullopt;
  std::size_t id = offsets_[p];
  for (std::size_t k = 0; k < atom.args.size(); ++k) {
    const int obj = atom.args[k];
    if (obj < 0 || static_cast<std::size_t>(obj) >= position_[p][k].size()) return std::nullopt;
    const int r = position_[p][k][obj];
    if (r < 0) return std::nullopt;
    id += static_cast<std::size_t>(r) * strides_[p][k];
  }
  return static_cast<AtomId>(id);
}

std::string AtomIndex::to_string(AtomId id) const {
  const auto& a = atoms_[id];
  std::string s = "(" + predicate_names_[a.predicate];
  for (int o : a.args) s += " " + object_names_[o];
  return s + ")";
}

// ---------------------------------------------------------------------------
// SymbolicState
// ---------------------------------------------------------------------------

std::size_t SymbolicState::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<AtomId> SymbolicState::atoms() const {
  std::vector<AtomId> out;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t bits = words_[w];
    while (bits) {
      const int b = std::countr_zero(bits);
      out.push_back(static_cast<AtomId>(w * 64 + static_cast<std::size_t>(b)));
      bits &= bits - 1;
    }
  }
  return out;
}

std::size_t SymbolicState::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto w : words_) {
    h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6U) + (h >> 2U);
  }
  return static_cast<std::size_t>(h);
}

// ---------------------------------------------------------------------------
// Grounding
// ---------------------------------------------------------------------------

namespace {

Literal ground_literal(const SchemaLiteral& l, const std::vector<int>& binding, const AtomIndex& atoms) {
  PredicateAtom a{l.predicate, {}};
  for (int arg : l.args) a.args.push_back(binding[arg]);
  return {*atoms.find(a), l.positive};
}

}  // namespace

std::vector<GroundAction> ground_actions(const DomainDescription& domain, const Problem& problem) {
  std::vector<GroundAction> out;
  for (std::size_t s = 0; s < domain.actions.size(); ++s) {
    const auto& schema = domain.actions[s];
    std::vector<std::vector<int>> cands;
    for (const auto& param : schema.params) {
      std::vector<int> c;
      for (std::size_t o = 0; o < problem.objects.size(); ++o) {
        if (domain.types.is_subtype(problem.objects[o].type, param.type)) c.push_back(static_cast<int>(o));
      }
      std::sort(c.begin(), c.end(), [&](int a, int b) { return problem.objects[a].name < problem.objects[b].name; });
      cands.push_back(std::move(c));
    }
    if (std::any_of(cands.begin(), cands.end(), [](const auto& c) { return c.empty(); })) continue;

    std::vector<std::size_t> odometer(cands.size(), 0);
    bool done = false;
    while (!done) {
      GroundAction ga;
      ga.schema = static_cast<int>(s);
      for (std::size_t k = 0; k < cands.size(); ++k) ga.args.push_back(cands[k][odometer[k]]);
      ga.name = "(" + schema.name;
      for (int o : ga.args) ga.name += " " + problem.objects[o].name;
      ga.name += ")";
      for (const auto& l : schema.precondition) ga.precondition.push_back(ground_literal(l, ga.args, problem.atoms));
      for (const auto& l : schema.effect) {
        const Literal g = ground_literal(l, ga.args, problem.atoms);
        (g.positive ? ga.add : ga.del).push_back(g.atom);
      }
      out.push_back(std::move(ga));

      std::size_t k = cands.size();
      for (;;) {
        if (k == 0) {
          done = true;
          break;
        }
        --k;
        if (++odometer[k] < cands[k].size()) break;
        odometer[k] = 0;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [&](const GroundAction& a, const GroundAction& b) {
    const auto& na = domain.actions[a.schema].name;
    const auto& nb = domain.actions[b.schema].name;
    if (na != nb) return na < nb;
    return std::lexicographical_compare(a.args.begin(), a.args.end(), b.args.begin(), b.args.end(),
                                        [&](int x, int y) { return problem.objects[x].name < problem.objects[y].name; });
  });
  return out;
}

bool holds(const SymbolicState& state, const Literal& literal) {
  return state.contains(literal.atom) == literal.positive;
}

bool check_goal(const SymbolicState& state, const Problem& problem) {
  return std::all_of(problem.goal.begin(), problem.goal.end(), [&](const Literal& l) { return holds(state, l); });
}

bool applicable(const SymbolicState& state, const GroundAction& action) {
  return std::all_of(action.precondition.begin(), action.precondition.end(),
                     [&](const Literal& l) { return holds(state, l); });
}

SymbolicState apply_action(const SymbolicState& state, const GroundAction& action, const AtomIndex& atoms) {
  for (const auto& l : action.precondition) {
    if (!holds(state, l)) throw PreconditionViolated(action.name, literal_to_string(l, atoms));
  }
  SymbolicState next = state;
  for (AtomId a : action.del) next.erase(a);
  for (AtomId a : action.add) next.insert(a);
  return next;
}

Task::Task(DomainDescription d, Problem p)
    : domain(std::move(d)), problem(std::move(p)), actions(ground_actions(domain, problem)) {}

std::optional<std::size_t> Task::find_action(std::string_view name) const {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i].name == name) return i;
  }
  return std::nullopt;
}

}  // namespace prefplan::pddl
