#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefplan/pddl.hpp"
#include "prefplan/planner.hpp"

namespace prefplan::prefs {

// Exact rational in lowest terms with a positive denominator. Trajectory
// costs are small-denominator fractions, so ties are decided exactly.
class Cost {
 public:
  constexpr Cost() = default;
  Cost(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Cost operator+(const Cost& a, const Cost& b);
  friend Cost operator-(const Cost& a, const Cost& b);
  friend bool operator==(const Cost& a, const Cost& b) = default;
  friend std::strong_ordering operator<=>(const Cost& a, const Cost& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// Zero-based value index per sub-preference space. Printed one-based as
// "<1,1,3>".
struct Preference {
  std::vector<int> values;

  std::string to_string() const;
  friend auto operator<=>(const Preference&, const Preference&) = default;
};

struct SubPreferenceSpace {
  std::string name;
  std::vector<std::string> labels;
  std::vector<std::optional<std::string>> templates;  // preference name or none
  int no_preference = 0;

  int cardinality() const { return static_cast<int>(labels.size()); }
};

enum class Choice : std::uint8_t { A, B, Tie };

std::string to_string(Choice c);
Choice choice_from_string(const std::string& s);
Choice flip(Choice c);

// Sub-costs of one trajectory for every (space, value).
struct CostProfile {
  std::vector<std::vector<Cost>> sub;  // [space][value]

  Cost total(const Preference& pref) const;
};

struct ScoredTrajectory {
  planner::Trajectory trajectory;
  CostProfile costs;
};

using TrajectoryRef = std::shared_ptr<const ScoredTrajectory>;

struct Query {
  TrajectoryRef a;
  TrajectoryRef b;
  Choice choice = Choice::Tie;
};

class PreferenceModel {
 public:
  // Validates the sidecar against the problem's named preferences: every
  // template must exist, share one constraint kind, and each space needs
  // exactly one no-preference value.
  PreferenceModel(const pddl::Task& task, const nlohmann::json& sidecar);
  static PreferenceModel load(const pddl::Task& task, const std::string& sidecar_path);

  std::size_t spaces() const { return spaces_.size(); }
  const SubPreferenceSpace& space(std::size_t n) const { return spaces_[n]; }
  int cardinality(std::size_t n) const { return spaces_[n].cardinality(); }
  std::vector<int> cardinalities() const;

  // All preferences in lexicographic order of value indices.
  const std::vector<Preference>& universe() const { return universe_; }
  std::size_t index_of(const Preference& pref) const;
  Preference no_preference() const;

  Cost sub_pref_cost(const planner::Trajectory& traj, std::size_t n, int v) const;
  Cost trajectory_cost(const planner::Trajectory& traj, const Preference& pref) const;
  CostProfile profile(const planner::Trajectory& traj) const;
  TrajectoryRef score(planner::Trajectory traj) const;

  std::vector<std::string> universe_labels() const;

 private:
  struct Template {
    pddl::ConstraintKind kind{};
    std::vector<pddl::Literal> at_end;
    std::vector<pddl::SometimeBefore> order;
    std::vector<bool> counted_action;  // per ground action
    std::int64_t budget = 0;
  };

  Cost evaluate(const Template& t, const planner::Trajectory& traj) const;

  std::vector<SubPreferenceSpace> spaces_;
  std::vector<std::vector<std::optional<Template>>> templates_;
  std::vector<Preference> universe_;
};

Choice noiseless_choice(const Cost& cost_a, const Cost& cost_b);
Choice noiseless_choice(const ScoredTrajectory& a, const ScoredTrajectory& b, const Preference& pref);

bool is_consistent(const Preference& pref, std::span<const Query> queries);

std::vector<Preference> consistent_set(std::span<const Query> queries, std::span<const Preference> universe);

// Noiseless queries for pref over the given pairs.
std::vector<Query> make_queries(const std::vector<std::pair<TrajectoryRef, TrajectoryRef>>& pairs,
                                const Preference& pref);

}  // namespace prefplan::prefs
