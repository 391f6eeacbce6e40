#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefplan/preferences.hpp"
#include "prefplan/selection.hpp"
#include "prefplan/user_sim.hpp"

namespace prefplan::data {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

// One probability vector per sub-preference space.
using Pmf = std::vector<std::vector<double>>;

struct Example {
  std::uint64_t id = 0;
  Split split = Split::Train;
  prefs::Preference ground_truth;
  std::vector<prefs::Query> queries_clean;
  std::map<sim::NoiseLevel, std::vector<prefs::Query>> queries_noisy;
  Pmf pmf_clean;
  std::map<sim::NoiseLevel, Pmf> pmf_noisy;

  // The noiseless level maps to the clean fields.
  const std::vector<prefs::Query>& queries(const sim::NoiseLevel& level) const;
  const Pmf& pmf(const sim::NoiseLevel& level) const;
};

struct Dataset {
  std::size_t L = 0;
  std::vector<sim::NoiseLevel> betas;  // noisy levels only
  std::vector<Example> examples;
  std::size_t noisy_fallbacks = 0;     // noisy PMFs that fell back to uniform

  std::vector<const Example*> split(Split s) const;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// 60/20/20 with the remainder going to test.
SplitSizes split_sizes(std::size_t m);

// Shuffles the pairs and cuts them 60/20/20 into disjoint split pools.
std::array<std::vector<planner::TrajectoryPair>, 3> partition_pairs(std::vector<planner::TrajectoryPair> pairs,
                                                                    std::uint64_t seed);

struct DatasetConfig {
  std::size_t m = 20000;
  std::size_t l = 10;
  std::vector<sim::NoiseLevel> betas;
  std::uint64_t seed = 0;
};

// Examples are split by id: the first 60% train, then val, then test. Each
// example owns a random stream derived from (seed, id). Throws
// Error{POOL_TOO_SMALL} if a split pool has fewer than L pairs.
Dataset build_dataset(const prefs::PreferenceModel& model, const std::vector<prefs::TrajectoryRef>& bank,
                      const std::array<std::vector<planner::TrajectoryPair>, 3>& split_pairs,
                      const DatasetConfig& config);

struct PmfResult {
  Pmf pmf;
  std::size_t consistent = 0;  // 0 means the uniform fallback was used
};

// PMF[n][k] = share of `consistent` with value k in space n; uniform when
// `consistent` is empty.
Pmf pmf_from_consistent(const std::vector<prefs::Preference>& consistent, const std::vector<int>& cardinalities);

// PMF[n][k] proportional to the number of consistent preferences with
// value k in space n. An empty consistent set yields uniform vectors.
PmfResult compute_pmf(std::span<const prefs::Query> queries, const prefs::PreferenceModel& model);

// Throws Error{DEGENERATE} when the clean queries admit no preference.
Pmf compute_pmf(const Example& example, const sim::NoiseLevel& level, const prefs::PreferenceModel& model);

// End-to-end generation: enumerate plans, annotate optima, thin the pool,
// build one pair pool and partition it across splits, then build examples.
struct GenerationConfig {
  std::size_t depth_bound = 0;  // 0 selects planner::default_depth_bound
  std::size_t max_plans = 1000000;
  std::size_t max_expansions = 100000000;
  std::size_t pool_size = 200;  // 0 keeps the whole pool
  std::size_t extra_pairs = 4000;
  DatasetConfig dataset;
};

struct Generated {
  planner::PlanPool pool;  // thinned, annotated
  std::vector<prefs::TrajectoryRef> bank;  // scored pool trajectories, same order
  std::array<std::vector<planner::TrajectoryPair>, 3> split_pairs;
  Dataset dataset;
};

Generated generate(const pddl::Task& task, const prefs::PreferenceModel& model, const GenerationConfig& config);

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kChoiceA = 3;
  static constexpr int kChoiceB = 4;
  static constexpr int kChoiceTie = 5;
  static constexpr int kFirstAction = 6;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> action_names);
  static Vocabulary from_task(const pddl::Task& task);

  std::size_t size() const { return kFirstAction + actions_.size(); }
  std::size_t action_count() const { return actions_.size(); }
  int action_token(std::size_t action) const;
  // Throws Error{UNKNOWN_ACTION} for special or out-of-range tokens.
  std::size_t action_of(int token) const;
  std::string token_name(int token) const;
  static int choice_token(prefs::Choice c);

  // BOS + action tokens + EOS.
  std::vector<int> encode(const planner::Trajectory& traj) const;
  std::vector<std::string> decode(const std::vector<int>& tokens) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  void write(const std::string& path) const;
  static Vocabulary read(const std::string& path);

  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<std::string> actions_;
};

struct TokenizedQuery {
  std::vector<int> a;
  std::vector<int> b;
  int choice = Vocabulary::kChoiceTie;
};

using TokenizedQuerySequence = std::vector<TokenizedQuery>;

TokenizedQuerySequence tokenize(const Example& example, const sim::NoiseLevel& level, const Vocabulary& vocab);

// Right-pads every row with PAD to the longest row.
std::vector<std::vector<int>> pad_batch(const std::vector<std::vector<int>>& rows);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr const char* kSchema = "prefplan/1";

void write_dataset(const Dataset& dataset, const Vocabulary& vocab, const std::string& path);

// Trajectories are replayed against the task and shared between queries
// that reference the same action sequence.
Dataset read_dataset(const std::string& path, const pddl::Task& task, const prefs::PreferenceModel& model,
                     const Vocabulary& vocab);

// Same ids, splits, ground truths, action sequences, choices and PMFs.
bool equivalent(const Dataset& x, const Dataset& y);

}  // namespace prefplan::data
