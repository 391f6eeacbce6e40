#pragma once

#include <cstdint>
#include <vector>

#include "prefplan/planner.hpp"
#include "prefplan/preferences.hpp"

namespace prefplan::planner {

// Index of the cheapest profile under pref; ties go to the lowest index.
// Throws Error{EMPTY_POOL} when profiles is empty.
std::size_t optimal_index(const std::vector<prefs::CostProfile>& profiles, const prefs::Preference& pref);

const Trajectory& optimal_plan_for_preference(const PlanPool& pool, const prefs::PreferenceModel& model,
                                              const prefs::Preference& pref);

// Fills pool.optimal_for with universe indices.
void annotate_optima(PlanPool& pool, const prefs::PreferenceModel& model);

// Unordered pair of pool indices, first < second.
struct TrajectoryPair {
  std::size_t first = 0;
  std::size_t second = 0;
  friend auto operator<=>(const TrajectoryPair&, const TrajectoryPair&) = default;
};

// Every pair of distinct preference-optimal trajectories (read from
// pool.optimal_for), followed by up to extra_pairs further pairs drawn
// uniformly without replacement from the remaining unordered pairs. The
// result never exceeds C(n, 2) pairs and has no repeats.
std::vector<TrajectoryPair> build_pair_pool(const PlanPool& pool, std::size_t extra_pairs, std::uint64_t seed);

// Seeded subsample of `target` trajectories that always retains every
// annotated optimum. Pool order is preserved and optimal_for re-indexed.
PlanPool thin_pool(const PlanPool& pool, std::size_t target, std::uint64_t seed);

}  // namespace prefplan::planner
