#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "prefplan/dataset.hpp"
#include "prefplan/error.hpp"

using namespace prefplan;
using namespace prefplan::data;

namespace {

GenerationConfig small_config(std::size_t m = 200) {
  GenerationConfig c;
  c.pool_size = 60;
  c.extra_pairs = 300;
  c.dataset.m = m;
  c.dataset.l = 10;
  c.dataset.betas = {sim::NoiseLevel::of(10), sim::NoiseLevel::of(1), sim::NoiseLevel::of(0.5)};
  c.dataset.seed = 77;
  return c;
}

const Generated& small() {
  static const Generated g = generate(fixtures::kitchen(), fixtures::kitchen_model(), small_config());
  return g;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("prefplan_test_" + name)).string();
}

}  // namespace

TEST_CASE("split arithmetic") {
  const auto s = split_sizes(20000);
  CHECK(s.train == 12000);
  CHECK(s.val == 4000);
  CHECK(s.test == 4000);
  const auto t = split_sizes(10);
  CHECK(t.train + t.val + t.test == 10);
}

TEST_CASE("cardinalities") {
  auto c = small_config(10);
  c.dataset.betas = {sim::NoiseLevel::of(1)};
  const auto g = generate(fixtures::kitchen(), fixtures::kitchen_model(), c);
  REQUIRE(g.dataset.examples.size() == 10);
  for (const auto& ex : g.dataset.examples) {
    CHECK(ex.queries_clean.size() == 10);
    REQUIRE(ex.queries_noisy.size() == 1);
    CHECK(ex.queries(sim::NoiseLevel::of(1)).size() == 10);
  }
}

TEST_CASE("pmf counting") {
  using prefs::Preference;
  const auto pmf = pmf_from_consistent({Preference{{0, 0, 2}}, Preference{{0, 1, 2}}, Preference{{1, 1, 2}}}, {3, 2, 3});
  CHECK(pmf[0] == std::vector<double>{2.0 / 3, 1.0 / 3, 0.0});
  CHECK(pmf[2] == std::vector<double>{0.0, 0.0, 1.0});
  const auto one = pmf_from_consistent({Preference{{1, 0, 2}}}, {3, 2, 3});
  CHECK(one == Pmf{{0, 1, 0}, {1, 0}, {0, 0, 1}});
  const auto& m = fixtures::kitchen_model();
  const auto none = compute_pmf(std::span<const prefs::Query>{}, m);
  CHECK(none.consistent == 18);
  for (const auto& v : none.pmf) {
    for (double x : v) CHECK(x == doctest::Approx(1.0 / v.size()).epsilon(1e-15));
  }
}

TEST_CASE("example invariants") {
  const auto& m = fixtures::kitchen_model();
  const auto& ds = small().dataset;
  Pcg32 rng(4, 4);
  for (const auto& ex : ds.examples) {
    const auto cs = prefs::consistent_set(ex.queries_clean, m.universe());
    CHECK(std::find(cs.begin(), cs.end(), ex.ground_truth) != cs.end());
    std::vector<const Pmf*> pmfs{&ex.pmf_clean};
    for (const auto& [_, p] : ex.pmf_noisy) pmfs.push_back(&p);
    for (const Pmf* p : pmfs) {
      for (const auto& v : *p) {
        double sum = 0;
        for (double x : v) {
          CHECK(x >= 0.0);
          sum += x;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
    }
    for (std::size_t n = 0; n < 3; ++n) CHECK(ex.pmf_clean[n][ex.ground_truth.values[n]] > 0.0);
    if (cs.size() == 1) {
      for (std::size_t n = 0; n < 3; ++n) CHECK(ex.pmf_clean[n][ex.ground_truth.values[n]] == 1.0);
    }
    // Order invariance.
    auto shuffled = ex.queries_clean;
    shuffle(shuffled, rng);
    CHECK(compute_pmf(shuffled, m).pmf == ex.pmf_clean);
  }
}

TEST_CASE("split disjointness at the pair level") {
  const auto& g = small();
  std::array<std::set<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>, 3> seen;
  for (const auto& ex : g.dataset.examples) {
    for (const auto& q : ex.queries_clean) {
      auto x = q.a->trajectory.actions;
      auto y = q.b->trajectory.actions;
      if (y < x) std::swap(x, y);
      seen[static_cast<std::size_t>(ex.split)].insert({x, y});
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK_FALSE(seen[s].empty());
    for (std::size_t t = s + 1; t < 3; ++t) {
      for (const auto& p : seen[s]) CHECK_FALSE(seen[t].contains(p));
    }
  }
}

TEST_CASE("pool too small") {
  auto c = small_config(10);
  c.pool_size = 4;
  c.extra_pairs = 0;
  try {
    generate(fixtures::kitchen(), fixtures::kitchen_model(), c);
    FAIL("expected POOL_TOO_SMALL");
  } catch (const Error& e) {
    CHECK(e.code() == "POOL_TOO_SMALL");
  }
}

TEST_CASE("tokenization") {
  const auto& task = fixtures::kitchen();
  const auto vocab = Vocabulary::from_task(task);
  CHECK(vocab.size() == task.actions.size() + 6);
  CHECK(vocab.size() == 28);
  planner::Trajectory empty{{task.problem.init}, {}};
  CHECK(vocab.encode(empty) == std::vector<int>{Vocabulary::kBos, Vocabulary::kEos});
  const auto& ex = small().dataset.examples[0];
  const auto seq = tokenize(ex, sim::NoiseLevel::none(), vocab);
  REQUIRE(seq.size() == 10);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    CHECK(vocab.decode(seq[k].a) == planner::action_names(task, ex.queries_clean[k].a->trajectory));
    CHECK(seq[k].b.size() <= planner::default_depth_bound(task) + 2);
    for (int t : seq[k].a) CHECK(static_cast<std::size_t>(t) < vocab.size());
  }
  CHECK_THROWS_AS(vocab.action_of(Vocabulary::kEos), Error);
  CHECK_THROWS_AS(vocab.action_of(28), Error);
  const auto padded = pad_batch({{1, 2}, {1, 6, 7, 2}});
  CHECK(padded[0] == std::vector<int>{1, 2, 0, 0});
  CHECK(Vocabulary::from_json(vocab.to_json()) == vocab);
}

TEST_CASE("serialization round trip and determinism") {
  const auto& task = fixtures::kitchen();
  const auto& m = fixtures::kitchen_model();
  const auto vocab = Vocabulary::from_task(task);
  const auto p1 = tmp("a.jsonl");
  const auto p2 = tmp("b.jsonl");
  write_dataset(small().dataset, vocab, p1);
  const auto again = generate(task, m, small_config());
  write_dataset(again.dataset, vocab, p2);
  CHECK(slurp(p1) == slurp(p2));
  const auto back = read_dataset(p1, task, m, vocab);
  CHECK(equivalent(back, small().dataset));

  // Header and line errors.
  {
    std::ofstream out(p2);
    out << "{\"schema\":\"prefplan/0\"}\n";
  }
  try {
    read_dataset(p2, task, m, vocab);
    FAIL("expected schema mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == "SCHEMA_MISMATCH");
  }
  {
    std::ofstream out(p2);
    std::ifstream in(p1);
    std::string line;
    std::getline(in, line);
    out << line << "\n";
    std::getline(in, line);
    out << line << "\n{\"id\": 3,\n";
  }
  try {
    read_dataset(p2, task, m, vocab);
    FAIL("expected malformed line");
  } catch (const Error& e) {
    CHECK(e.code() == "MALFORMED_LINE");
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}
