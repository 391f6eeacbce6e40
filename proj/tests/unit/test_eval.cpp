#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "prefplan/error.hpp"
#include "prefplan/eval.hpp"

using namespace prefplan;
using namespace prefplan::eval;

namespace {

const data::Generated& small() {
  static const data::Generated g = [] {
    data::GenerationConfig c;
    c.pool_size = 60;
    c.extra_pairs = 300;
    c.dataset.m = 400;
    c.dataset.l = 10;
    c.dataset.betas = {sim::NoiseLevel::of(10), sim::NoiseLevel::of(1), sim::NoiseLevel::of(0.5)};
    c.dataset.seed = 12;
    return data::generate(fixtures::kitchen(), fixtures::kitchen_model(), c);
  }();
  return g;
}

std::vector<const data::Example*> all_examples() {
  std::vector<const data::Example*> out;
  for (const auto& e : small().dataset.examples) out.push_back(&e);
  return out;
}

PredictionRecord record(std::vector<int> predicted, std::vector<int> truth, bool consistent) {
  PredictionRecord r;
  r.predicted.values = std::move(predicted);
  r.truth.values = std::move(truth);
  r.consistent = consistent;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("tpr and aor arithmetic") {
  CHECK(tpr({record({0, 0, 0}, {0, 0, 0}, true), record({2, 1, 2}, {2, 1, 2}, true)}) == 1.0);
  CHECK(tpr({record({0, 1, 2}, {0, 1, 0}, true)}) == 0.0);  // two of three heads
  CHECK(tpr({record({0, 0, 0}, {0, 0, 0}, true), record({1, 0, 0}, {1, 0, 0}, true), record({2, 0, 0}, {2, 0, 0}, true),
             record({0, 0, 1}, {0, 0, 0}, false)}) == 0.75);
  CHECK(aor({record({0, 0, 1}, {0, 0, 0}, true), record({0, 0, 1}, {0, 0, 0}, false)}) == 0.5);
  CHECK(tpr({}) == 0.0);
}

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(argmax_preference({{0.2, 0.4, 0.4}, {0.5, 0.5}, {0.1, 0.1, 0.8}}).values == std::vector<int>{1, 0, 2});
}

TEST_CASE("baseline on clean queries is always consistent") {
  const auto& model = fixtures::kitchen_model();
  const auto recs = pr_baseline(all_examples(), sim::NoiseLevel::none(), model, 3);
  CHECK(aor(recs) == 1.0);
  CHECK(aor(recs) >= tpr(recs));
  for (const auto& r : recs) {
    CHECK(r.consistent_size.value() >= 1);
    for (std::size_t n = 0; n < r.predicted.values.size(); ++n) {
      CHECK(r.predicted.values[n] >= 0);
      CHECK(r.predicted.values[n] < model.cardinality(n));
    }
  }
}

TEST_CASE("baseline singleton and fallback cases") {
  const auto& model = fixtures::kitchen_model();
  bool saw_singleton = false;
  bool saw_empty = false;
  for (const auto* ex : all_examples()) {
    const auto clean = prefs::consistent_set(ex->queries_clean, model.universe());
    if (clean.size() == 1 && !saw_singleton) {
      saw_singleton = true;
      for (std::uint64_t s = 0; s < 20; ++s) {
        Pcg32 rng(s);
        const auto d = pr_baseline_predict(*ex, sim::NoiseLevel::none(), model, rng);
        CHECK(d.preference == ex->ground_truth);
        CHECK(d.consistent_size == 1);
      }
    }
    const auto level = sim::NoiseLevel::of(0.5);
    if (!saw_empty && prefs::consistent_set(ex->queries(level), model.universe()).empty()) {
      saw_empty = true;
      std::set<prefs::Preference> seen;
      for (std::uint64_t s = 0; s < 400; ++s) {
        Pcg32 rng(s);
        const auto d = pr_baseline_predict(*ex, level, model, rng);
        CHECK(d.consistent_size == 0);
        seen.insert(d.preference);
      }
      CHECK(seen.size() == model.universe().size());
    }
  }
  CHECK(saw_singleton);
  CHECK(saw_empty);
}

TEST_CASE("baseline hit rate matches the counting oracle") {
  const auto& model = fixtures::kitchen_model();
  const data::Example* chosen = nullptr;
  std::size_t k = 0;
  for (const auto* ex : all_examples()) {
    k = prefs::consistent_set(ex->queries_clean, model.universe()).size();
    if (k >= 3) {
      chosen = ex;
      break;
    }
  }
  REQUIRE(chosen != nullptr);
  const int draws = 60000;
  int hits = 0;
  Pcg32 rng(99);
  for (int i = 0; i < draws; ++i) hits += pr_baseline_predict(*chosen, {}, model, rng).preference == chosen->ground_truth;
  const double p = 1.0 / static_cast<double>(k);
  const double sigma = std::sqrt(p * (1 - p) / draws);
  CHECK(std::abs(hits / static_cast<double>(draws) - p) < 3 * sigma);
}

TEST_CASE("baseline TPR agrees with the expected value over seeds") {
  const auto& model = fixtures::kitchen_model();
  const auto exs = all_examples();
  for (const auto& level : {sim::NoiseLevel::none(), sim::NoiseLevel::of(1)}) {
    const double expected = pr_expected_tpr(exs, level, model);
    // Per-example variance of a Bernoulli(q_i) hit.
    double var = 0.0;
    for (const auto* ex : exs) {
      const auto cs = prefs::consistent_set(ex->queries(level), model.universe());
      double q = 0.0;
      if (cs.empty()) {
        q = 1.0 / 18.0;
      } else if (std::find(cs.begin(), cs.end(), ex->ground_truth) != cs.end()) {
        q = 1.0 / static_cast<double>(cs.size());
      }
      var += q * (1 - q);
    }
    const std::size_t seeds = 20;
    double mean = 0.0;
    for (std::uint64_t s = 0; s < seeds; ++s) mean += tpr(pr_baseline(exs, level, model, s));
    mean /= seeds;
    const double sigma = std::sqrt(var) / static_cast<double>(exs.size()) / std::sqrt(static_cast<double>(seeds));
    INFO(level.key(), " expected ", expected, " measured ", mean, " sigma ", sigma);
    CHECK(std::abs(mean - expected) < 3 * sigma);
  }
}

TEST_CASE("network predictions") {
  const auto vocab = data::Vocabulary::from_task(fixtures::kitchen());
  nn::ModelDims d;
  d.vocab = static_cast<int>(vocab.size());
  d.embed = 6;
  d.hidden = 5;
  d.choice = 3;
  d.query = 8;
  d.trunk = 8;
  nn::Model m(d, 4);
  const auto exs = all_examples();
  const auto a = nn_predict(m, exs, sim::NoiseLevel::of(1), vocab);
  const auto b = nn_predict(m, exs, sim::NoiseLevel::of(1), vocab, 7);
  REQUIRE(a.size() == exs.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == exs[i]->id);
    CHECK(a[i].predicted == argmax_preference(a[i].probabilities));
    CHECK(a[i].consistent == prefs::is_consistent(a[i].predicted, exs[i]->queries_clean));
    for (std::size_t n = 0; n < 3; ++n) {
      for (std::size_t k = 0; k < a[i].probabilities[n].size(); ++k) {
        CHECK(a[i].probabilities[n][k] == doctest::Approx(b[i].probabilities[n][k]).epsilon(1e-12));
      }
    }
  }
  CHECK(aor(a) >= tpr(a));
}

TEST_CASE("summaries use the sample standard deviation") {
  const auto s = summarize({0.2, 0.4, 0.6});
  CHECK(s.mean == doctest::Approx(0.4));
  CHECK(s.std == doctest::Approx(0.2));
  CHECK(s.n_seeds == 3);
  CHECK(summarize({0.5}).std == 0.0);
}

TEST_CASE("report marks missing columns and keeps going") {
  const auto& model = fixtures::kitchen_model();
  const auto test = small().dataset.split(data::Split::Test);
  const std::vector<Column> cols{{"single_target", "ce", "single", "none"}, {"pr_baseline", "-", "-", "-"}};
  const std::vector<Evaluator> evals{
      [](const sim::NoiseLevel&, std::uint64_t) -> std::vector<PredictionRecord> {
        throw Error("MISSING_CHECKPOINT", "neural", "no checkpoint in x");
      },
      [&](const sim::NoiseLevel& level, std::uint64_t seed) { return pr_baseline(test, level, model, seed); }};
  const std::vector<sim::NoiseLevel> levels{sim::NoiseLevel::none(), sim::NoiseLevel::of(10), sim::NoiseLevel::of(1),
                                            sim::NoiseLevel::of(0.5)};
  const auto rep = build_report(cols, evals, levels, {1, 2, 3});
  CHECK(rep.cells[0].empty());
  CHECK(rep.errors[0].find("MISSING_CHECKPOINT") != std::string::npos);
  REQUIRE(rep.cells[1].size() == 4);
  CHECK(rep.cells[1][0][1]->mean == 1.0);
  CHECK(rep.cells[1][0][1]->std == 0.0);
  for (const auto& cell : rep.cells[1]) {
    CHECK(cell[1]->mean >= cell[0]->mean);
    CHECK(cell[0]->n_seeds == 3);
  }

  const auto dir = std::filesystem::temp_directory_path();
  write_report_csv(rep, (dir / "prefplan_test_report.csv").string());
  write_report_md(rep, (dir / "prefplan_test_report.md").string());
  const auto csv = slurp((dir / "prefplan_test_report.csv").string());
  CHECK(csv.rfind("model,loss_kind,target_kind,beta_train,beta_eval,metric,mean,std,n_seeds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 4 * 2);
  CHECK(csv.find("single_target,ce,single,none,none,TPR,MISSING") != std::string::npos);
  const auto md = slurp((dir / "prefplan_test_report.md").string());
  CHECK(md.find("MISSING") != std::string::npos);
  CHECK(md.find("| ∅ | AOR |") != std::string::npos);
  CHECK(md.find("1.000 ± 0.000") != std::string::npos);
}

TEST_CASE("report rejects AOR below TPR") {
  const std::vector<Column> cols{{"pr_baseline", "-", "-", "-"}};
  const std::vector<Evaluator> evals{[](const sim::NoiseLevel&, std::uint64_t) {
    return std::vector<PredictionRecord>{record({0, 0, 0}, {0, 0, 0}, false)};
  }};
  CHECK_THROWS_AS(build_report(cols, evals, {sim::NoiseLevel::none()}, {1}), Error);
}

TEST_CASE("table columns") {
  const auto cols = table_columns();
  CHECK(cols.size() == 12);
  CHECK(cols.back().model == "pr_baseline");
  CHECK(std::count_if(cols.begin(), cols.end(), [](const Column& c) { return c.loss_kind == "kl"; }) == 7);
  CHECK(cols[0].label() == "Single Target (β_train=∅)");
}
