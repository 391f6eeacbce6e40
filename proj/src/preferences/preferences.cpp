#include "prefplan/preferences.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "prefplan/error.hpp"

namespace prefplan::prefs {

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error("CONFIG", "preferences", msg); }

}  // namespace

// ---------------------------------------------------------------------------
// Cost
// ---------------------------------------------------------------------------

Cost::Cost(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error("DEGENERATE", "preferences", "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

Cost operator+(const Cost& a, const Cost& b) {
  const std::int64_t l = std::lcm(a.den_, b.den_);
  return Cost(a.num_ * (l / a.den_) + b.num_ * (l / b.den_), l);
}

Cost operator-(const Cost& a, const Cost& b) { return a + Cost(-b.num_, b.den_); }

std::strong_ordering operator<=>(const Cost& a, const Cost& b) {
  return a.num_ * b.den_ <=> b.num_ * a.den_;
}

// ---------------------------------------------------------------------------
// Preference / Choice
// ---------------------------------------------------------------------------

std::string Preference::to_string() const {
  std::string s = "<";
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (n) s += ",";
    s += std::to_string(values[n] + 1);
  }
  return s + ">";
}

std::string to_string(Choice c) {
  switch (c) {
    case Choice::A: return "A";
    case Choice::B: return "B";
    case Choice::Tie: return "TIE";
  }
  return "?";
}

Choice choice_from_string(const std::string& s) {
  if (s == "A") return Choice::A;
  if (s == "B") return Choice::B;
  if (s == "TIE") return Choice::Tie;
  throw Error("SCHEMA_MISMATCH", "preferences", "unknown choice '" + s + "'");
}

Choice flip(Choice c) {
  if (c == Choice::A) return Choice::B;
  if (c == Choice::B) return Choice::A;
  return c;
}

Cost CostProfile::total(const Preference& pref) const {
  Cost sum;
  for (std::size_t n = 0; n < pref.values.size(); ++n) sum = sum + sub[n][pref.values[n]];
  return sum;
}

// ---------------------------------------------------------------------------
// PreferenceModel
// ---------------------------------------------------------------------------

PreferenceModel::PreferenceModel(const pddl::Task& task, const nlohmann::json& sidecar) {
  if (!sidecar.is_object() || !sidecar.contains("spaces") || !sidecar["spaces"].is_array() ||
      sidecar["spaces"].empty()) {
    config_error("preference sidecar needs a non-empty \"spaces\" array");
  }
  for (const auto& js : sidecar["spaces"]) {
    SubPreferenceSpace space;
    space.name = js.value("name", std::string{});
    if (!js.contains("values") || !js["values"].is_array() || js["values"].empty()) {
      config_error("space '" + space.name + "' has no values");
    }
    int nones = 0;
    std::vector<std::optional<Template>> temps;
    for (const auto& jv : js["values"]) {
      space.labels.push_back(jv.value("label", std::string{}));
      const auto& jt = jv.contains("template") ? jv["template"] : nlohmann::json();
      if (jt.is_null()) {
        space.no_preference = static_cast<int>(space.templates.size());
        space.templates.emplace_back(std::nullopt);
        temps.emplace_back(std::nullopt);
        ++nones;
        continue;
      }
      if (!jt.is_string()) config_error("template of '" + space.labels.back() + "' must be a string or null");
      const auto name = jt.get<std::string>();
      Template t;
      bool first = true;
      std::vector<int> schemas;
      for (const auto& c : task.problem.constraints) {
        if (c.name != name) continue;
        if (!first && c.kind() != t.kind) config_error("preference '" + name + "' mixes constraint kinds");
        t.kind = c.kind();
        first = false;
        if (const auto* ae = std::get_if<pddl::AtEnd>(&c.payload)) t.at_end.push_back(ae->literal);
        if (const auto* sb = std::get_if<pddl::SometimeBefore>(&c.payload)) t.order.push_back(*sb);
        if (const auto* mo = std::get_if<pddl::MinimizeOccurrences>(&c.payload)) {
          schemas.insert(schemas.end(), mo->actions.begin(), mo->actions.end());
        }
      }
      if (first) config_error("template '" + name + "' not declared in the problem's :constraints");
      if (t.kind == pddl::ConstraintKind::MinimizeOccurrences) {
        t.counted_action.assign(task.actions.size(), false);
        for (std::size_t a = 0; a < task.actions.size(); ++a) {
          if (std::find(schemas.begin(), schemas.end(), task.actions[a].schema) != schemas.end()) {
            t.counted_action[a] = true;
            ++t.budget;
          }
        }
        if (t.budget == 0) config_error("preference '" + name + "' counts no ground actions");
      }
      space.templates.emplace_back(name);
      temps.emplace_back(std::move(t));
    }
    if (nones != 1) config_error("space '" + space.name + "' needs exactly one no-preference value");
    spaces_.push_back(std::move(space));
    templates_.push_back(std::move(temps));
  }

  // Odometer over all value combinations, last space fastest.
  std::vector<int> v(spaces_.size(), 0);
  for (;;) {
    universe_.push_back(Preference{v});
    std::size_t n = v.size();
    while (n > 0) {
      --n;
      if (++v[n] < spaces_[n].cardinality()) break;
      v[n] = 0;
      if (n == 0) return;
    }
  }
}

PreferenceModel PreferenceModel::load(const pddl::Task& task, const std::string& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw Error("IO", "preferences", "cannot read '" + sidecar_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    config_error(sidecar_path + ": " + e.what());
  }
  return PreferenceModel(task, j);
}

std::vector<int> PreferenceModel::cardinalities() const {
  std::vector<int> out;
  for (const auto& s : spaces_) out.push_back(s.cardinality());
  return out;
}

std::size_t PreferenceModel::index_of(const Preference& pref) const {
  std::size_t idx = 0;
  for (std::size_t n = 0; n < spaces_.size(); ++n) {
    idx = idx * static_cast<std::size_t>(spaces_[n].cardinality()) + static_cast<std::size_t>(pref.values.at(n));
  }
  return idx;
}

Preference PreferenceModel::no_preference() const {
  Preference p;
  for (const auto& s : spaces_) p.values.push_back(s.no_preference);
  return p;
}

std::vector<std::string> PreferenceModel::universe_labels() const {
  std::vector<std::string> out;
  for (const auto& p : universe_) out.push_back(p.to_string());
  return out;
}

Cost PreferenceModel::evaluate(const Template& t, const planner::Trajectory& traj) const {
  switch (t.kind) {
    case pddl::ConstraintKind::AtEnd: {
      const auto total = static_cast<std::int64_t>(t.at_end.size());
      std::int64_t violated = 0;
      for (const auto& l : t.at_end) violated += pddl::holds(traj.final_state(), l) ? 0 : 1;
      return Cost(2 * violated - total, total);
    }
    case pddl::ConstraintKind::SometimeBefore: {
      // Only pairs whose literals both occur somewhere are decided.
      std::int64_t decided = 0;
      std::int64_t violated = 0;
      for (const auto& c : t.order) {
        std::optional<std::size_t> first_later;
        bool earlier_seen = false;
        bool earlier_before = false;
        for (std::size_t s = 0; s < traj.states.size(); ++s) {
          if (!first_later && pddl::holds(traj.states[s], c.later)) first_later = s;
          if (pddl::holds(traj.states[s], c.earlier)) {
            earlier_seen = true;
            if (!first_later) earlier_before = true;
          }
        }
        if (!first_later || !earlier_seen) continue;
        ++decided;
        if (!earlier_before) ++violated;
      }
      if (decided == 0) return Cost();
      return Cost(2 * violated - decided, decided);
    }
    case pddl::ConstraintKind::MinimizeOccurrences: {
      std::int64_t occ = 0;
      for (std::size_t a : traj.actions) occ += t.counted_action[a] ? 1 : 0;
      return Cost(2 * std::min(occ, t.budget) - t.budget, t.budget);
    }
  }
  return Cost();
}

Cost PreferenceModel::sub_pref_cost(const planner::Trajectory& traj, std::size_t n, int v) const {
  const auto& t = templates_.at(n).at(static_cast<std::size_t>(v));
  return t ? evaluate(*t, traj) : Cost();
}

Cost PreferenceModel::trajectory_cost(const planner::Trajectory& traj, const Preference& pref) const {
  Cost sum;
  for (std::size_t n = 0; n < spaces_.size(); ++n) sum = sum + sub_pref_cost(traj, n, pref.values.at(n));
  return sum;
}

CostProfile PreferenceModel::profile(const planner::Trajectory& traj) const {
  CostProfile p;
  p.sub.resize(spaces_.size());
  for (std::size_t n = 0; n < spaces_.size(); ++n) {
    for (int v = 0; v < spaces_[n].cardinality(); ++v) p.sub[n].push_back(sub_pref_cost(traj, n, v));
  }
  return p;
}

TrajectoryRef PreferenceModel::score(planner::Trajectory traj) const {
  auto s = std::make_shared<ScoredTrajectory>();
  s->costs = profile(traj);
  s->trajectory = std::move(traj);
  return s;
}

// ---------------------------------------------------------------------------
// Choices and consistency
// ---------------------------------------------------------------------------

Choice noiseless_choice(const Cost& cost_a, const Cost& cost_b) {
  if (cost_a < cost_b) return Choice::A;
  if (cost_b < cost_a) return Choice::B;
  return Choice::Tie;
}

Choice noiseless_choice(const ScoredTrajectory& a, const ScoredTrajectory& b, const Preference& pref) {
  return noiseless_choice(a.costs.total(pref), b.costs.total(pref));
}

bool is_consistent(const Preference& pref, std::span<const Query> queries) {
  return std::all_of(queries.begin(), queries.end(),
                     [&](const Query& q) { return noiseless_choice(*q.a, *q.b, pref) == q.choice; });
}

std::vector<Preference> consistent_set(std::span<const Query> queries, std::span<const Preference> universe) {
  std::vector<Preference> out;
  for (const auto& p : universe) {
    if (is_consistent(p, queries)) out.push_back(p);
  }
  return out;
}

std::vector<Query> make_queries(const std::vector<std::pair<TrajectoryRef, TrajectoryRef>>& pairs,
                                const Preference& pref) {
  std::vector<Query> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) out.push_back(Query{a, b, noiseless_choice(*a, *b, pref)});
  return out;
}

}  // namespace prefplan::prefs
