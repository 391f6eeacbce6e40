#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "prefplan/pddl.hpp"

namespace prefplan::planner {

// states.size() == actions.size() + 1; states[0] is the initial state and
// states[t + 1] = apply(states[t], actions[t]). Actions index Task::actions.
struct Trajectory {
  std::vector<pddl::SymbolicState> states;
  std::vector<std::size_t> actions;

  std::size_t length() const { return actions.size(); }
  const pddl::SymbolicState& final_state() const { return states.back(); }
  bool operator==(const Trajectory&) const = default;
};

// Re-applies `actions` from the task's initial state. Throws
// PreconditionViolated if any step is inapplicable.
Trajectory replay(const pddl::Task& task, const std::vector<std::size_t>& actions);

// True iff the trajectory replays exactly, reaches the goal and respects the
// depth bound.
bool is_valid_trajectory(const pddl::Task& task, const Trajectory& traj, std::size_t depth_bound);

std::vector<std::string> action_names(const pddl::Task& task, const Trajectory& traj);

struct PlanPool {
  std::vector<Trajectory> trajectories;
  // Per trajectory: universe indices of the preferences it is optimal for
  // (filled by annotate_optima; empty until then).
  std::vector<std::vector<std::size_t>> optimal_for;

  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }
};

struct SearchLimits {
  std::size_t depth_bound = 0;
  std::size_t max_plans = 100000;
  std::size_t max_expansions = 50'000'000;
};

// (objects x 2) + (receptacles x 2) + 2, where receptacles are objects whose
// type descends from "receptacle".
std::size_t default_depth_bound(const pddl::Task& task);

// Depth-first enumeration of goal-reaching plans with at most
// limits.depth_bound actions. A plan stops at the first goal state. Search
// nodes (state, remaining depth) proven to have no goal-reaching
// continuation are pruned, which never removes a plan. Successors are tried
// in ground-action index order, so plans come out lexicographically ordered
// by action index. Throws Error{RESOURCE_LIMIT} past max_expansions.
PlanPool enumerate_plans(const pddl::Task& task, const SearchLimits& limits);

// Writes one JSON object per line: {"id", "actions", "optimal_for"}.
void write_plan_pool_jsonl(const PlanPool& pool, const pddl::Task& task,
                           const std::vector<std::string>& preference_labels, const std::string& path);

}  // namespace prefplan::planner
