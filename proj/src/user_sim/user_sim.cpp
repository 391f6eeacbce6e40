#include "prefplan/user_sim.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "prefplan/error.hpp"

namespace prefplan::sim {

NoiseLevel NoiseLevel::of(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error("CONFIG", "user-sim", "beta must be positive and finite");
  }
  return NoiseLevel{beta};
}

std::string NoiseLevel::key() const {
  if (!beta) return "none";
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), *beta);
  return std::string(buf.data(), r.ptr);
}

NoiseLevel NoiseLevel::parse(const std::string& key) {
  if (key == "none" || key.empty()) return none();
  double v = 0.0;
  const auto r = std::from_chars(key.data(), key.data() + key.size(), v);
  if (r.ec != std::errc() || r.ptr != key.data() + key.size()) {
    throw Error("CONFIG", "user-sim", "bad noise level '" + key + "'");
  }
  return of(v);
}

double choice_probability(double cost_a, double cost_b, double beta) {
  const double ea = -beta * cost_a;
  const double eb = -beta * cost_b;
  const double m = std::max(ea, eb);
  const double wa = std::exp(ea - m);
  const double wb = std::exp(eb - m);
  return wa / (wa + wb);
}

prefs::Choice sample_choice(const prefs::Cost& cost_a, const prefs::Cost& cost_b, double beta, Pcg32& rng) {
  if (cost_a == cost_b) return prefs::Choice::Tie;
  return rng.bernoulli(choice_probability(cost_a.value(), cost_b.value(), beta)) ? prefs::Choice::A
                                                                                 : prefs::Choice::B;
}

prefs::Choice sample_choice(const prefs::ScoredTrajectory& a, const prefs::ScoredTrajectory& b,
                            const prefs::Preference& pref, double beta, Pcg32& rng) {
  return sample_choice(a.costs.total(pref), b.costs.total(pref), beta, rng);
}

std::vector<prefs::Query> inject_noise(std::span<const prefs::Query> queries, const prefs::Preference& pref,
                                       double beta, Pcg32& rng) {
  std::vector<prefs::Query> out(queries.begin(), queries.end());
  for (auto& q : out) {
    if (q.choice == prefs::Choice::Tie) continue;
    q.choice = sample_choice(*q.a, *q.b, pref, beta, rng);
  }
  return out;
}

}  // namespace prefplan::sim
