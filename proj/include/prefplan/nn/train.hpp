#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefplan/dataset.hpp"
#include "prefplan/nn/model.hpp"
#include "prefplan/user_sim.hpp"

namespace prefplan::nn {

struct TrainConfig {
  LossKind loss = LossKind::CE;
  TargetKind target = TargetKind::Single;
  sim::NoiseLevel beta_train;  // level of the input queries
  double lr = 1e-3;
  std::size_t batch = 64;
  double weight_decay = 0.01;
  std::size_t patience = 60;       // evaluations without a strict improvement
  double eval_fraction = 0.05;     // of an epoch between evaluations
  double val_fraction = 0.05;      // of the val split per evaluation
  std::size_t max_epochs = 50;
  std::size_t max_steps = 0;       // 0 means unbounded
  std::uint64_t seed = 0;
  ModelDims dims;                  // vocab is filled from the vocabulary

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Patience counter over a stream of validation losses. The first loss seen
// is evaluation 0.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when training should stop after this evaluation.
  bool update(double loss);
  bool improved() const { return improved_; }
  double best() const { return best_; }
  std::size_t evaluations() const { return evaluations_; }
  std::size_t since_best() const { return since_best_; }

 private:
  std::size_t patience_;
  double best_ = 0.0;
  bool improved_ = false;
  std::size_t evaluations_ = 0;
  std::size_t since_best_ = 0;
};

struct LogRow {
  std::size_t step = 0;
  std::optional<double> train_loss;  // mean over the steps since the previous evaluation
  double val_loss = 0.0;
  std::size_t patience = 0;
};

struct TrainResult {
  Model model;  // best checkpoint
  std::size_t steps = 0;
  std::size_t best_step = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
  std::vector<LogRow> log;
};

// Examples of one split with their inputs and targets, ready for batching.
struct Prepared {
  std::vector<data::TokenizedQuerySequence> inputs;
  std::vector<std::vector<std::vector<double>>> targets;  // [example][head][value]
};

Prepared prepare(const std::vector<const data::Example*>& examples, const data::Vocabulary& vocab,
                 const TrainConfig& config);

Batch make_batch(const Prepared& data, const std::vector<std::size_t>& rows);
Targets make_targets(const Prepared& data, const std::vector<std::size_t>& rows, const std::vector<int>& heads);

// Mean loss over the given rows, evaluated in chunks. No gradients.
double evaluate_loss(Model& model, const Prepared& data, const std::vector<std::size_t>& rows, LossKind kind);

// Throws Error{DIVERGENCE} on a non-finite training loss.
TrainResult train(const data::Dataset& dataset, const data::Vocabulary& vocab, const TrainConfig& config);

void write_train_log(const std::vector<LogRow>& log, const std::string& path);

struct GridCell {
  double lr = 0.0;
  std::size_t batch = 0;
  std::optional<double> best_val_loss;
  std::string error;  // set when the cell failed
};

struct GridResult {
  std::vector<GridCell> cells;  // lr-major order
  std::size_t best = 0;
  TrainResult result;
};

// Trains every (lr, batch) cell and keeps the lowest best validation loss.
// Ties go to the earlier cell. Failed cells are recorded and skipped; if
// every cell fails the first error is rethrown.
GridResult grid_search(const data::Dataset& dataset, const data::Vocabulary& vocab, const TrainConfig& base,
                       const std::vector<double>& lrs, const std::vector<std::size_t>& batches, unsigned jobs = 1);

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]"
  std::size_t checked = 0;
};

// Central differences against the tape gradient of the loss. Relative error
// is |a - n| / max(|a|, |n|, 1e-6). per_param = 0 checks every entry;
// otherwise that many entries per parameter are sampled.
GradcheckReport gradcheck(Model& model, const Batch& batch, LossKind kind, const Targets& targets,
                          double eps = 1e-5, std::size_t per_param = 0, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointSchema = "prefplan-checkpoint/1";

// Writes <dir>/manifest.json and <dir>/weights.bin (float64, little endian).
void save_checkpoint(const Model& model, const nlohmann::json& config, const std::string& dir);

struct Checkpoint {
  Model model;
  nlohmann::json config;
};

// Throws Error{MISSING_CHECKPOINT} or Error{SCHEMA_MISMATCH}.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace prefplan::nn
