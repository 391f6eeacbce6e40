#include "prefplan/selection.hpp"

#include <algorithm>
#include <set>

#include "prefplan/error.hpp"
#include "prefplan/rng.hpp"

namespace prefplan::planner {

namespace {

std::vector<prefs::CostProfile> profiles_of(const PlanPool& pool, const prefs::PreferenceModel& model) {
  std::vector<prefs::CostProfile> out;
  out.reserve(pool.size());
  for (const auto& t : pool.trajectories) out.push_back(model.profile(t));
  return out;
}

// Pairs (i, j), i < j, numbered lexicographically.
std::uint64_t row_start(std::uint64_t i, std::uint64_t n) { return i * n - i * (i + 1) / 2; }

TrajectoryPair pair_at(std::uint64_t k, std::uint64_t n) {
  std::uint64_t lo = 0;
  std::uint64_t hi = n - 1;  // row_start(lo) <= k < row_start(hi)
  while (hi - lo > 1) {
    const std::uint64_t mid = (lo + hi) / 2;
    (row_start(mid, n) <= k ? lo : hi) = mid;
  }
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(lo + 1 + (k - row_start(lo, n)))};
}

}  // namespace

std::size_t optimal_index(const std::vector<prefs::CostProfile>& profiles, const prefs::Preference& pref) {
  if (profiles.empty()) throw Error("EMPTY_POOL", "planner", "no trajectories to choose from");
  std::size_t best = 0;
  prefs::Cost best_cost = profiles[0].total(pref);
  for (std::size_t i = 1; i < profiles.size(); ++i) {
    const prefs::Cost c = profiles[i].total(pref);
    if (c < best_cost) {
      best = i;
      best_cost = c;
    }
  }
  return best;
}

const Trajectory& optimal_plan_for_preference(const PlanPool& pool, const prefs::PreferenceModel& model,
                                              const prefs::Preference& pref) {
  return pool.trajectories[optimal_index(profiles_of(pool, model), pref)];
}

void annotate_optima(PlanPool& pool, const prefs::PreferenceModel& model) {
  const auto profiles = profiles_of(pool, model);
  pool.optimal_for.assign(pool.size(), {});
  const auto& universe = model.universe();
  for (std::size_t u = 0; u < universe.size(); ++u) {
    pool.optimal_for[optimal_index(profiles, universe[u])].push_back(u);
  }
}

std::vector<TrajectoryPair> build_pair_pool(const PlanPool& pool, std::size_t extra_pairs, std::uint64_t seed) {
  const std::uint64_t n = pool.size();
  std::vector<TrajectoryPair> out;
  if (n < 2) return out;

  std::vector<std::size_t> optima;
  for (std::size_t i = 0; i < pool.optimal_for.size(); ++i) {
    if (!pool.optimal_for[i].empty()) optima.push_back(i);
  }
  std::set<TrajectoryPair> taken;
  for (std::size_t x = 0; x < optima.size(); ++x) {
    for (std::size_t y = x + 1; y < optima.size(); ++y) {
      out.push_back({optima[x], optima[y]});
      taken.insert(out.back());
    }
  }

  const std::uint64_t all = n * (n - 1) / 2;
  const std::uint64_t remaining = all - taken.size();
  if (extra_pairs >= remaining) {
    for (std::uint64_t k = 0; k < all; ++k) {
      const auto p = pair_at(k, n);
      if (!taken.contains(p)) out.push_back(p);
    }
    return out;
  }
  Pcg32 rng = make_stream(seed, 0x7061697273ULL);
  for (std::size_t drawn = 0; drawn < extra_pairs;) {
    const auto p = pair_at(rng.bounded64(all), n);
    if (taken.insert(p).second) {
      out.push_back(p);
      ++drawn;
    }
  }
  return out;
}

PlanPool thin_pool(const PlanPool& pool, std::size_t target, std::uint64_t seed) {
  if (target >= pool.size()) return pool;
  std::vector<bool> keep(pool.size(), false);
  std::vector<std::size_t> others;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i < pool.optimal_for.size() && !pool.optimal_for[i].empty()) {
      keep[i] = true;
      ++kept;
    } else {
      others.push_back(i);
    }
  }
  if (kept < target) {
    Pcg32 rng = make_stream(seed, 0x7468696eULL);
    for (std::size_t j : sample_without_replacement(others.size(), target - kept, rng)) keep[others[j]] = true;
  }
  PlanPool out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!keep[i]) continue;
    out.trajectories.push_back(pool.trajectories[i]);
    out.optimal_for.push_back(i < pool.optimal_for.size() ? pool.optimal_for[i] : std::vector<std::size_t>{});
  }
  return out;
}

}  // namespace prefplan::planner
