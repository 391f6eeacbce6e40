#pragma once

#include <string>

#include "prefplan/pddl.hpp"
#include "prefplan/preferences.hpp"

namespace fixtures {

inline std::string data(const std::string& name) { return std::string(PREFPLAN_DATA_DIR) + "/" + name; }

inline const prefplan::pddl::Task& kitchen() {
  static const prefplan::pddl::Task task = [] {
    auto d = prefplan::pddl::load_domain(data("kitchen.domain.pddl"));
    auto p = prefplan::pddl::load_problem(data("kitchen.problem.pddl"), d);
    return prefplan::pddl::Task(std::move(d), std::move(p));
  }();
  return task;
}

inline const prefplan::prefs::PreferenceModel& kitchen_model() {
  static const prefplan::prefs::PreferenceModel model =
      prefplan::prefs::PreferenceModel::load(kitchen(), data("kitchen.preferences.json"));
  return model;
}

inline prefplan::pddl::Task apple_task() {
  auto d = prefplan::pddl::load_domain(data("kitchen.domain.pddl"));
  auto p = prefplan::pddl::load_problem(data("apple.problem.pddl"), d);
  return prefplan::pddl::Task(std::move(d), std::move(p));
}

// Replays action names against the kitchen task.
inline std::vector<std::size_t> actions_by_name(const prefplan::pddl::Task& task,
                                                const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) out.push_back(*task.find_action(n));
  return out;
}

}  // namespace fixtures
