#include "prefplan/planner.hpp"

#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "prefplan/error.hpp"

namespace prefplan::planner {

Trajectory replay(const pddl::Task& task, const std::vector<std::size_t>& actions) {
  Trajectory t;
  t.states.reserve(actions.size() + 1);
  t.states.push_back(task.problem.init);
  for (std::size_t a : actions) {
    if (a >= task.actions.size()) {
      throw Error("UNKNOWN_ACTION", "planner", "action index " + std::to_string(a) + " out of range");
    }
    t.states.push_back(task.apply(t.states.back(), a));
    t.actions.push_back(a);
  }
  return t;
}

bool is_valid_trajectory(const pddl::Task& task, const Trajectory& traj, std::size_t depth_bound) {
  if (traj.states.size() != traj.actions.size() + 1) return false;
  if (traj.actions.size() > depth_bound) return false;
  if (traj.states.front() != task.problem.init) return false;
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    const auto& ga = task.actions.at(traj.actions[t]);
    if (!pddl::applicable(traj.states[t], ga)) return false;
    if (task.apply(traj.states[t], traj.actions[t]) != traj.states[t + 1]) return false;
  }
  return pddl::check_goal(traj.final_state(), task.problem);
}

std::vector<std::string> action_names(const pddl::Task& task, const Trajectory& traj) {
  std::vector<std::string> out;
  out.reserve(traj.actions.size());
  for (std::size_t a : traj.actions) out.push_back(task.actions[a].name);
  return out;
}

std::size_t default_depth_bound(const pddl::Task& task) {
  std::size_t receptacles = 0;
  if (const auto t = task.domain.types.find("receptacle")) {
    receptacles = task.problem.count_objects_of_type(task.domain.types, *t);
  }
  return task.problem.objects.size() * 2 + receptacles * 2 + 2;
}

namespace {

class Enumerator {
 public:
  Enumerator(const pddl::Task& task, const SearchLimits& limits) : task_(task), limits_(limits) {}

  PlanPool run() {
    // search() holds references into states_ across push_back.
    states_.reserve(limits_.depth_bound + 2);
    states_.push_back(task_.problem.init);
    search(limits_.depth_bound);
    return std::move(pool_);
  }

 private:
  bool full() const { return pool_.trajectories.size() >= limits_.max_plans; }

  // Returns true if at least one plan was recorded below this node.
  bool search(std::size_t remaining) {
    const pddl::SymbolicState& state = states_.back();
    if (pddl::check_goal(state, task_.problem)) {
      pool_.trajectories.push_back(Trajectory{states_, actions_});
      return true;
    }
    if (remaining == 0) return false;
    if (auto it = dead_.find(state); it != dead_.end() && remaining <= it->second) return false;
    if (++expansions_ > limits_.max_expansions) {
      throw Error("RESOURCE_LIMIT", "planner",
                  "node expansions exceeded " + std::to_string(limits_.max_expansions));
    }
    bool found = false;
    for (std::size_t a = 0; a < task_.actions.size() && !full(); ++a) {
      const auto& ga = task_.actions[a];
      if (!pddl::applicable(state, ga)) continue;
      pddl::SymbolicState next = task_.apply(state, a);
      states_.push_back(std::move(next));
      actions_.push_back(a);
      found = search(remaining - 1) || found;
      states_.pop_back();
      actions_.pop_back();
    }
    if (!found) {
      // No plan within `remaining` steps implies none within fewer.
      auto& best = dead_[states_.back()];
      best = std::max(best, remaining);
    }
    return found;
  }

  const pddl::Task& task_;
  SearchLimits limits_;
  PlanPool pool_;
  std::vector<pddl::SymbolicState> states_;
  std::vector<std::size_t> actions_;
  std::unordered_map<pddl::SymbolicState, std::size_t, pddl::StateHash> dead_;
  std::size_t expansions_ = 0;
};

}  // namespace

PlanPool enumerate_plans(const pddl::Task& task, const SearchLimits& limits) {
  PlanPool pool = Enumerator(task, limits).run();
  pool.optimal_for.assign(pool.trajectories.size(), {});
  return pool;
}

void write_plan_pool_jsonl(const PlanPool& pool, const pddl::Task& task,
                           const std::vector<std::string>& preference_labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IO", "planner", "cannot write '" + path + "'");
  for (std::size_t i = 0; i < pool.trajectories.size(); ++i) {
    nlohmann::json line;
    line["id"] = i;
    line["actions"] = action_names(task, pool.trajectories[i]);
    auto opt = nlohmann::json::array();
    if (i < pool.optimal_for.size()) {
      for (std::size_t p : pool.optimal_for[i]) opt.push_back(preference_labels.at(p));
    }
    line["optimal_for"] = std::move(opt);
    out << line.dump() << '\n';
  }
}

}  // namespace prefplan::planner
