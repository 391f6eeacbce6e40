#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prefplan/dataset.hpp"
#include "prefplan/nn/model.hpp"
#include "prefplan/preferences.hpp"
#include "prefplan/rng.hpp"
#include "prefplan/user_sim.hpp"

namespace prefplan::eval {

struct PredictionRecord {
  std::uint64_t id = 0;
  prefs::Preference predicted;
  prefs::Preference truth;
  std::vector<std::vector<double>> probabilities;  // networks only
  std::optional<std::size_t> consistent_size;      // baseline only; 0 means the universe fallback
  bool consistent = false;                         // with the clean queries
};

struct BaselineDraw {
  prefs::Preference preference;
  std::size_t consistent_size = 0;
};

// Uniform over the consistent set of the level's queries, or over the whole
// universe when that set is empty.
BaselineDraw pr_baseline_predict(const data::Example& example, const sim::NoiseLevel& level,
                                 const prefs::PreferenceModel& model, Pcg32& rng);

// One independent draw per example from make_stream(seed, id).
std::vector<PredictionRecord> pr_baseline(const std::vector<const data::Example*>& examples,
                                          const sim::NoiseLevel& level, const prefs::PreferenceModel& model,
                                          std::uint64_t seed);

// Per-head argmax, ties to the lowest index.
prefs::Preference argmax_preference(const std::vector<std::vector<double>>& probabilities);

std::vector<PredictionRecord> nn_predict(nn::Model& network, const std::vector<const data::Example*>& examples,
                                         const sim::NoiseLevel& level, const data::Vocabulary& vocab,
                                         std::size_t chunk = 256);

double tpr(const std::vector<PredictionRecord>& records);
double aor(const std::vector<PredictionRecord>& records);

// Mean over test examples of 1 / |consistent set of the level's queries|,
// with the universe size standing in for an empty set.
double pr_expected_tpr(const std::vector<const data::Example*>& examples, const sim::NoiseLevel& level,
                       const prefs::PreferenceModel& model);

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

enum class Metric { TPR = 0, AOR = 1 };
std::string to_string(Metric m);

struct Column {
  std::string model;        // "single_target", "distribution", "noisy_distribution", "pr_baseline"
  std::string loss_kind;    // "ce", "kl" or "-"
  std::string target_kind;  // as nn::to_string(TargetKind) or "-"
  std::string beta_train;   // NoiseLevel key or "-"

  std::string label() const;
};

// The eleven trained models plus the baseline.
std::vector<Column> table_columns();

struct CellStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for one seed
  std::size_t n_seeds = 0;
};

struct ReportMatrix {
  std::vector<Column> columns;
  std::vector<sim::NoiseLevel> beta_eval;
  // cells[column][beta index][metric]; empty when the column failed.
  std::vector<std::vector<std::array<std::optional<CellStats>, 2>>> cells;
  std::vector<std::string> errors;  // per column, empty when fine
};

// Produces the records of one column at one evaluation level and seed.
// Throwing marks the column missing; the report carries on.
using Evaluator = std::function<std::vector<PredictionRecord>(const sim::NoiseLevel& beta_eval, std::uint64_t seed)>;

// Throws Error{INVARIANT} if some evaluated cell has AOR < TPR.
ReportMatrix build_report(const std::vector<Column>& columns, const std::vector<Evaluator>& evaluators,
                          const std::vector<sim::NoiseLevel>& beta_eval, const std::vector<std::uint64_t>& seeds);

CellStats summarize(const std::vector<double>& values);

void write_report_csv(const ReportMatrix& report, const std::string& path);
void write_report_md(const ReportMatrix& report, const std::string& path);
std::string report_markdown(const ReportMatrix& report);

}  // namespace prefplan::eval
