#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefplan/preferences.hpp"
#include "prefplan/rng.hpp"

namespace prefplan::sim {

// beta absent means noiseless choices.
struct NoiseLevel {
  std::optional<double> beta;

  static NoiseLevel none() { return {}; }
  static NoiseLevel of(double beta);
  // "none" when noiseless, otherwise the shortest round-trip decimal ("10", "0.5").
  std::string key() const;
  static NoiseLevel parse(const std::string& key);
  bool noiseless() const { return !beta.has_value(); }

  friend auto operator<=>(const NoiseLevel&, const NoiseLevel&) = default;
};

// exp(-beta a) / (exp(-beta a) + exp(-beta b)).
double choice_probability(double cost_a, double cost_b, double beta);

// TIE on exactly equal costs, otherwise A with choice_probability.
prefs::Choice sample_choice(const prefs::Cost& cost_a, const prefs::Cost& cost_b, double beta, Pcg32& rng);
prefs::Choice sample_choice(const prefs::ScoredTrajectory& a, const prefs::ScoredTrajectory& b,
                            const prefs::Preference& pref, double beta, Pcg32& rng);

// Resamples every non-TIE choice from the Boltzmann law; TIEs and
// trajectories are left as they are.
std::vector<prefs::Query> inject_noise(std::span<const prefs::Query> queries, const prefs::Preference& pref,
                                       double beta, Pcg32& rng);

}  // namespace prefplan::sim
