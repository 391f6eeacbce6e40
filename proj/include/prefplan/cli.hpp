#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prefplan/dataset.hpp"
#include "prefplan/eval.hpp"
#include "prefplan/nn/train.hpp"
#include "prefplan/pddl.hpp"
#include "prefplan/preferences.hpp"

namespace prefplan::cli {

// One trained column of the report: a supervision type at one beta_train.
struct ModelCell {
  std::string model;  // single_target | distribution | noisy_distribution
  nn::LossKind loss = nn::LossKind::CE;
  nn::TargetKind target = nn::TargetKind::Single;
  sim::NoiseLevel beta_train;

  std::string id() const;  // "single_target-none"
  eval::Column column() const;
};

// "single_target:none", "noisy_distribution:0.5", ...
ModelCell parse_model_cell(const std::string& spec);
std::vector<ModelCell> all_model_cells();

struct RunConfig {
  std::string domain;
  std::string problem;
  std::string preferences;
  std::string out;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  data::GenerationConfig generation;
  std::vector<ModelCell> models;
  std::vector<double> lrs;
  std::vector<std::size_t> batches;
  std::size_t train_seeds = 5;
  nn::TrainConfig train;  // lr and batch come from the grid
  std::vector<sim::NoiseLevel> beta_eval;
  std::size_t eval_seeds = 5;
  nlohmann::json effective;  // merged JSON the run was built from
};

nlohmann::json default_config();
// "a.b.c=value"; the value is parsed as JSON when it parses, else kept as a string.
void apply_set(nlohmann::json& config, const std::string& assignment);
// Defaults, then the file (if any), then --set overrides, then PREFPLAN_SEED.
nlohmann::json load_config(const std::string& path, const std::vector<std::string>& sets);
// Throws Error{CONFIG} on unknown keys or invalid values.
RunConfig parse_config(const nlohmann::json& config);

std::uint64_t fnv1a64(std::string_view bytes);
std::string config_hash(const nlohmann::json& config);

std::uint64_t train_seed(const RunConfig& config, std::size_t replicate);
std::uint64_t eval_seed(const RunConfig& config, std::size_t replicate);

// Loaded task, preference model and vocabulary.
struct Inputs {
  std::unique_ptr<pddl::Task> task;
  std::unique_ptr<prefs::PreferenceModel> model;
  data::Vocabulary vocab;
};
Inputs load_inputs(const RunConfig& config);

struct Paths {
  std::string root;
  std::string dataset() const { return root + "/dataset.jsonl"; }
  std::string vocab() const { return root + "/vocab.json"; }
  std::string plans() const { return root + "/plans.jsonl"; }
  std::string checkpoint(const ModelCell& cell, std::size_t replicate) const;
  std::string predictions(const std::string& column, const sim::NoiseLevel& level, std::size_t replicate) const;
  std::string report_csv() const { return root + "/report.csv"; }
  std::string report_md() const { return root + "/report.md"; }
  std::string manifest(const std::string& command) const { return root + "/manifest." + command + ".json"; }
};

void write_manifest(const RunConfig& config, const std::string& command, const std::vector<std::string>& outputs);
void write_predictions(const std::vector<eval::PredictionRecord>& records, const std::string& path);

int cmd_gen(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_baseline(const RunConfig& config, std::ostream& log);
int cmd_eval(const RunConfig& config, std::ostream& log);
int cmd_report(const RunConfig& config, std::ostream& log);
int cmd_gradcheck(const RunConfig& config, std::ostream& log);

}  // namespace prefplan::cli
