#include "prefplan/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "prefplan/error.hpp"
#include "prefplan/rng.hpp"

namespace prefplan::data {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error("SCHEMA_MISMATCH", "dataset", "unknown split '" + s + "'");
}

const std::vector<prefs::Query>& Example::queries(const sim::NoiseLevel& level) const {
  if (level.noiseless()) return queries_clean;
  const auto it = queries_noisy.find(level);
  if (it == queries_noisy.end()) throw Error("CONFIG", "dataset", "no queries at beta=" + level.key());
  return it->second;
}

const Pmf& Example::pmf(const sim::NoiseLevel& level) const {
  if (level.noiseless()) return pmf_clean;
  const auto it = pmf_noisy.find(level);
  if (it == pmf_noisy.end()) throw Error("CONFIG", "dataset", "no PMF at beta=" + level.key());
  return it->second;
}

std::vector<const Example*> Dataset::split(Split s) const {
  std::vector<const Example*> out;
  for (const auto& e : examples) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

SplitSizes split_sizes(std::size_t m) {
  SplitSizes s;
  s.train = m * 60 / 100;
  s.val = m * 20 / 100;
  s.test = m - s.train - s.val;
  return s;
}

std::array<std::vector<planner::TrajectoryPair>, 3> partition_pairs(std::vector<planner::TrajectoryPair> pairs,
                                                                    std::uint64_t seed) {
  Pcg32 rng = make_stream(seed, 0x73706c6974ULL);
  shuffle(pairs, rng);
  const SplitSizes sz = split_sizes(pairs.size());
  std::array<std::vector<planner::TrajectoryPair>, 3> out;
  out[0].assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(sz.train));
  out[1].assign(pairs.begin() + static_cast<std::ptrdiff_t>(sz.train),
                pairs.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.val));
  out[2].assign(pairs.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.val), pairs.end());
  return out;
}

Pmf pmf_from_consistent(const std::vector<prefs::Preference>& consistent, const std::vector<int>& cardinalities) {
  Pmf pmf(cardinalities.size());
  for (std::size_t n = 0; n < cardinalities.size(); ++n) {
    auto& v = pmf[n];
    v.assign(static_cast<std::size_t>(cardinalities[n]), 0.0);
    if (consistent.empty()) {
      std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
      continue;
    }
    for (const auto& p : consistent) v[static_cast<std::size_t>(p.values[n])] += 1.0;
    for (double& x : v) x /= static_cast<double>(consistent.size());
  }
  return pmf;
}

PmfResult compute_pmf(std::span<const prefs::Query> queries, const prefs::PreferenceModel& model) {
  const auto consistent = prefs::consistent_set(queries, model.universe());
  return PmfResult{pmf_from_consistent(consistent, model.cardinalities()), consistent.size()};
}

Pmf compute_pmf(const Example& example, const sim::NoiseLevel& level, const prefs::PreferenceModel& model) {
  auto r = compute_pmf(example.queries(level), model);
  if (r.consistent == 0 && level.noiseless()) {
    throw Error("DEGENERATE", "dataset", "example " + std::to_string(example.id) + " has no consistent preference");
  }
  return std::move(r.pmf);
}

Dataset build_dataset(const prefs::PreferenceModel& model, const std::vector<prefs::TrajectoryRef>& bank,
                      const std::array<std::vector<planner::TrajectoryPair>, 3>& split_pairs,
                      const DatasetConfig& config) {
  for (std::size_t s = 0; s < 3; ++s) {
    if (split_pairs[s].size() < config.l) {
      throw Error("POOL_TOO_SMALL", "dataset",
                  to_string(static_cast<Split>(s)) + " pool has " + std::to_string(split_pairs[s].size()) +
                      " pairs, need " + std::to_string(config.l));
    }
  }
  Dataset ds;
  ds.L = config.l;
  for (const auto& b : config.betas) {
    if (!b.noiseless()) ds.betas.push_back(b);
  }
  const SplitSizes sz = split_sizes(config.m);
  const auto& universe = model.universe();
  ds.examples.reserve(config.m);
  for (std::size_t id = 0; id < config.m; ++id) {
    Example ex;
    ex.id = id;
    ex.split = id < sz.train ? Split::Train : (id < sz.train + sz.val ? Split::Val : Split::Test);
    const auto& pool = split_pairs[static_cast<std::size_t>(ex.split)];

    Pcg32 rng = make_stream(config.seed, id);
    ex.ground_truth = universe[rng.bounded(static_cast<std::uint32_t>(universe.size()))];
    for (std::size_t k : sample_without_replacement(pool.size(), config.l, rng)) {
      prefs::TrajectoryRef a = bank.at(pool[k].first);
      prefs::TrajectoryRef b = bank.at(pool[k].second);
      if (rng.bernoulli(0.5)) std::swap(a, b);
      ex.queries_clean.push_back(prefs::Query{a, b, prefs::noiseless_choice(*a, *b, ex.ground_truth)});
    }
    ex.pmf_clean = compute_pmf(ex, sim::NoiseLevel::none(), model);
    for (const auto& level : ds.betas) {
      auto noisy = sim::inject_noise(ex.queries_clean, ex.ground_truth, *level.beta, rng);
      auto r = compute_pmf(noisy, model);
      if (r.consistent == 0) ++ds.noisy_fallbacks;
      ex.queries_noisy.emplace(level, std::move(noisy));
      ex.pmf_noisy.emplace(level, std::move(r.pmf));
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

Generated generate(const pddl::Task& task, const prefs::PreferenceModel& model, const GenerationConfig& config) {
  const std::uint64_t seed = config.dataset.seed;
  planner::SearchLimits limits;
  limits.depth_bound = config.depth_bound ? config.depth_bound : planner::default_depth_bound(task);
  limits.max_plans = config.max_plans;
  limits.max_expansions = config.max_expansions;
  Generated g;
  g.pool = planner::enumerate_plans(task, limits);
  if (g.pool.size() < 2) throw Error("EMPTY_POOL", "dataset", "planner produced fewer than two plans");
  planner::annotate_optima(g.pool, model);
  if (config.pool_size) g.pool = planner::thin_pool(g.pool, config.pool_size, derive_seed(seed, 1));
  for (const auto& t : g.pool.trajectories) g.bank.push_back(model.score(t));
  g.split_pairs = partition_pairs(planner::build_pair_pool(g.pool, config.extra_pairs, derive_seed(seed, 2)),
                                  derive_seed(seed, 3));
  DatasetConfig dc = config.dataset;
  dc.seed = derive_seed(seed, 4);
  g.dataset = build_dataset(model, g.bank, g.split_pairs, dc);
  return g;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> action_names) : actions_(std::move(action_names)) {}

Vocabulary Vocabulary::from_task(const pddl::Task& task) {
  std::vector<std::string> names;
  for (const auto& a : task.actions) names.push_back(a.name);
  return Vocabulary(std::move(names));
}

int Vocabulary::action_token(std::size_t action) const {
  if (action >= actions_.size()) {
    throw Error("UNKNOWN_ACTION", "dataset", "action index " + std::to_string(action) + " not in vocabulary");
  }
  return kFirstAction + static_cast<int>(action);
}

std::size_t Vocabulary::action_of(int token) const {
  if (token < kFirstAction || static_cast<std::size_t>(token) >= size()) {
    throw Error("UNKNOWN_ACTION", "dataset", "token " + std::to_string(token) + " is not an action");
  }
  return static_cast<std::size_t>(token - kFirstAction);
}

std::string Vocabulary::token_name(int token) const {
  static const char* specials[] = {"<pad>", "<bos>", "<eos>", "<choice-a>", "<choice-b>", "<choice-tie>"};
  if (token >= 0 && token < kFirstAction) return specials[token];
  return actions_.at(action_of(token));
}

int Vocabulary::choice_token(prefs::Choice c) {
  switch (c) {
    case prefs::Choice::A: return kChoiceA;
    case prefs::Choice::B: return kChoiceB;
    case prefs::Choice::Tie: return kChoiceTie;
  }
  return kChoiceTie;
}

std::vector<int> Vocabulary::encode(const planner::Trajectory& traj) const {
  std::vector<int> out;
  out.reserve(traj.actions.size() + 2);
  out.push_back(kBos);
  for (std::size_t a : traj.actions) out.push_back(action_token(a));
  out.push_back(kEos);
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& tokens) const {
  std::vector<std::string> out;
  for (int t : tokens) {
    if (t == kBos || t == kEos || t == kPad) continue;
    out.push_back(actions_.at(action_of(t)));
  }
  return out;
}

json Vocabulary::to_json() const {
  json tokens = json::array();
  for (std::size_t t = 0; t < size(); ++t) tokens.push_back(token_name(static_cast<int>(t)));
  return json{{"schema", kSchema}, {"tokens", tokens}};
}

Vocabulary Vocabulary::from_json(const json& j) {
  if (j.value("schema", std::string{}) != kSchema) {
    throw Error("SCHEMA_MISMATCH", "dataset", "vocabulary schema is not " + std::string(kSchema));
  }
  const auto& tokens = j.at("tokens");
  std::vector<std::string> names;
  for (std::size_t t = kFirstAction; t < tokens.size(); ++t) names.push_back(tokens[t].get<std::string>());
  return Vocabulary(std::move(names));
}

void Vocabulary::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IO", "dataset", "cannot write '" + path + "'");
  out << to_json().dump(2) << '\n';
}

Vocabulary Vocabulary::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IO", "dataset", "cannot read '" + path + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error("SCHEMA_MISMATCH", "dataset", path + ": " + e.what());
  }
}

TokenizedQuerySequence tokenize(const Example& example, const sim::NoiseLevel& level, const Vocabulary& vocab) {
  TokenizedQuerySequence out;
  for (const auto& q : example.queries(level)) {
    out.push_back({vocab.encode(q.a->trajectory), vocab.encode(q.b->trajectory), Vocabulary::choice_token(q.choice)});
  }
  return out;
}

std::vector<std::vector<int>> pad_batch(const std::vector<std::vector<int>>& rows) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.size());
  std::vector<std::vector<int>> out = rows;
  for (auto& r : out) r.resize(width, Vocabulary::kPad);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::vector<int> action_tokens(const planner::Trajectory& t, const Vocabulary& vocab) {
  std::vector<int> out;
  for (std::size_t a : t.actions) out.push_back(vocab.action_token(a));
  return out;
}

ordered_json choices_json(const std::vector<prefs::Query>& qs) {
  ordered_json out = ordered_json::array();
  for (const auto& q : qs) out.push_back(prefs::to_string(q.choice));
  return out;
}

[[noreturn]] void malformed(std::size_t line, const std::string& msg) {
  throw Error("MALFORMED_LINE", "dataset", "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

void write_dataset(const Dataset& dataset, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IO", "dataset", "cannot write '" + path + "'");
  ordered_json header;
  header["schema"] = kSchema;
  header["L"] = dataset.L;
  auto betas = ordered_json::array();
  for (const auto& b : dataset.betas) betas.push_back(b.key());
  header["betas"] = betas;
  header["examples"] = dataset.examples.size();
  header["vocab_size"] = vocab.size();
  header["token_encoding"] = "action token ids from vocab.json, no BOS/EOS";
  out << header.dump() << '\n';

  for (const auto& ex : dataset.examples) {
    ordered_json j;
    j["id"] = ex.id;
    j["split"] = to_string(ex.split);
    auto gt = ordered_json::array();
    for (int v : ex.ground_truth.values) gt.push_back(v + 1);
    j["ground_truth"] = gt;
    auto qs = ordered_json::array();
    for (const auto& q : ex.queries_clean) {
      qs.push_back(ordered_json::array({action_tokens(q.a->trajectory, vocab), action_tokens(q.b->trajectory, vocab)}));
    }
    j["queries"] = qs;
    j["choices_clean"] = choices_json(ex.queries_clean);
    ordered_json noisy = ordered_json::object();
    for (const auto& [level, q] : ex.queries_noisy) noisy[level.key()] = choices_json(q);
    j["choices_noisy"] = noisy;
    j["pmf_clean"] = ex.pmf_clean;
    ordered_json pmfs = ordered_json::object();
    for (const auto& [level, p] : ex.pmf_noisy) pmfs[level.key()] = p;
    j["pmf_noisy"] = pmfs;
    out << j.dump() << '\n';
  }
}

Dataset read_dataset(const std::string& path, const pddl::Task& task, const prefs::PreferenceModel& model,
                     const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("IO", "dataset", "cannot read '" + path + "'");
  if (vocab.action_count() != task.actions.size()) {
    throw Error("SCHEMA_MISMATCH", "dataset", "vocabulary does not match the task's ground actions");
  }
  std::string line;
  std::size_t lineno = 0;
  Dataset ds;
  if (!std::getline(in, line)) throw Error("SCHEMA_MISMATCH", "dataset", path + ": missing header");
  ++lineno;
  try {
    const json h = json::parse(line);
    if (h.value("schema", std::string{}) != kSchema) {
      throw Error("SCHEMA_MISMATCH", "dataset", path + ": expected schema " + std::string(kSchema));
    }
    ds.L = h.at("L").get<std::size_t>();
    for (const auto& b : h.at("betas")) ds.betas.push_back(sim::NoiseLevel::parse(b.get<std::string>()));
  } catch (const json::exception& e) {
    throw Error("SCHEMA_MISMATCH", "dataset", path + ": bad header: " + e.what());
  }

  std::map<std::vector<int>, prefs::TrajectoryRef> interned;
  auto intern = [&](const json& tokens) {
    auto key = tokens.get<std::vector<int>>();
    auto it = interned.find(key);
    if (it != interned.end()) return it->second;
    std::vector<std::size_t> actions;
    for (int t : key) actions.push_back(vocab.action_of(t));
    auto ref = model.score(planner::replay(task, actions));
    interned.emplace(std::move(key), ref);
    return ref;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Example ex;
      ex.id = j.at("id").get<std::uint64_t>();
      ex.split = split_from_string(j.at("split").get<std::string>());
      for (int v : j.at("ground_truth").get<std::vector<int>>()) ex.ground_truth.values.push_back(v - 1);
      const auto& qs = j.at("queries");
      const auto& clean = j.at("choices_clean");
      if (clean.size() != qs.size()) malformed(lineno, "choices_clean length differs from queries");
      for (std::size_t k = 0; k < qs.size(); ++k) {
        ex.queries_clean.push_back(
            prefs::Query{intern(qs[k].at(0)), intern(qs[k].at(1)), prefs::choice_from_string(clean[k].get<std::string>())});
      }
      for (const auto& [key, arr] : j.at("choices_noisy").items()) {
        if (arr.size() != qs.size()) malformed(lineno, "choices_noisy[" + key + "] length differs from queries");
        std::vector<prefs::Query> noisy = ex.queries_clean;
        for (std::size_t k = 0; k < arr.size(); ++k) noisy[k].choice = prefs::choice_from_string(arr[k].get<std::string>());
        ex.queries_noisy.emplace(sim::NoiseLevel::parse(key), std::move(noisy));
      }
      ex.pmf_clean = j.at("pmf_clean").get<Pmf>();
      for (const auto& [key, p] : j.at("pmf_noisy").items()) ex.pmf_noisy.emplace(sim::NoiseLevel::parse(key), p.get<Pmf>());
      ds.examples.push_back(std::move(ex));
    } catch (const json::exception& e) {
      malformed(lineno, e.what());
    } catch (const Error& e) {
      if (e.code() == "MALFORMED_LINE") throw;
      malformed(lineno, e.what());
    }
  }
  return ds;
}

namespace {

bool same_queries(const std::vector<prefs::Query>& x, const std::vector<prefs::Query>& y) {
  if (x.size() != y.size()) return false;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].choice != y[k].choice) return false;
    if (x[k].a->trajectory.actions != y[k].a->trajectory.actions) return false;
    if (x[k].b->trajectory.actions != y[k].b->trajectory.actions) return false;
  }
  return true;
}

}  // namespace

bool equivalent(const Dataset& x, const Dataset& y) {
  if (x.L != y.L || x.betas != y.betas || x.examples.size() != y.examples.size()) return false;
  for (std::size_t i = 0; i < x.examples.size(); ++i) {
    const auto& a = x.examples[i];
    const auto& b = y.examples[i];
    if (a.id != b.id || a.split != b.split || a.ground_truth != b.ground_truth) return false;
    if (!same_queries(a.queries_clean, b.queries_clean) || a.pmf_clean != b.pmf_clean) return false;
    if (a.queries_noisy.size() != b.queries_noisy.size() || a.pmf_noisy != b.pmf_noisy) return false;
    for (const auto& [level, q] : a.queries_noisy) {
      const auto it = b.queries_noisy.find(level);
      if (it == b.queries_noisy.end() || !same_queries(q, it->second)) return false;
    }
  }
  return true;
}

}  // namespace prefplan::data
