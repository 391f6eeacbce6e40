#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefplan/dataset.hpp"
#include "prefplan/nn/autodiff.hpp"

namespace prefplan::nn {

struct ModelDims {
  int vocab = 0;
  int embed = 32;
  int hidden = 64;  // per direction
  int choice = 16;
  int query = 128;
  int trunk = 128;
  int trunk_layers = 2;
  std::vector<int> heads{3, 2, 3};

  nlohmann::json to_json() const;
  static ModelDims from_json(const nlohmann::json& j);
  bool operator==(const ModelDims&) const = default;
};

// Trajectories of a batch, deduplicated and sorted by decreasing length,
// plus per-query indices into that list.
struct Batch {
  std::vector<std::vector<int>> trajectories;  // BOS ... EOS
  std::vector<int> query_a;
  std::vector<int> query_b;
  std::vector<int> query_choice;  // choice token minus Vocabulary::kChoiceA
  std::vector<int> offsets;       // queries of example k: [offsets[k], offsets[k + 1])

  std::size_t examples() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

// Queries are put in a canonical order inside each example, so the batch
// (and the model output) does not depend on the order they were asked in.
Batch make_batch(const std::vector<const data::TokenizedQuerySequence*>& sequences);

class Model {
 public:
  Model() = default;
  Model(const ModelDims& dims, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  Parameter& param(const std::string& name);
  const Parameter& param(const std::string& name) const;
  std::size_t parameter_count() const;
  void zero_grad();

  // Log-probabilities per head (batch x |P^n|), recorded on the tape.
  std::vector<Var> forward(Tape& tape, const Batch& batch);
  // Probabilities per head, no gradients.
  std::vector<Matrix> predict(const Batch& batch);

 private:
  Var encode(Tape& tape, const Var& proj, const Var& w_h, const Batch& batch, bool reverse);

  ModelDims dims_;
  std::vector<Parameter> params_;
};

enum class LossKind { CE, KL };
enum class TargetKind { Single, CleanDistribution, NoisyDistribution };

std::string to_string(LossKind k);
std::string to_string(TargetKind k);
LossKind loss_kind_from_string(const std::string& s);
TargetKind target_kind_from_string(const std::string& s);

// Targets per head (batch x |P^n|): one-hot rows for CE, PMF rows for KL.
using Targets = std::vector<Matrix>;

// sum_n exp(-s_n) * (1/B) sum_i -sum_k p_ik log max(yhat_ik, 1e-12) + sum_n s_n.
Var ce_loss(const std::vector<Var>& log_probs, const Targets& targets, const Var& s);
// Same weighting over full-support KL(p || yhat), with 0 log 0 = 0.
Var kl_loss(const std::vector<Var>& log_probs, const Targets& targets, const Var& s);
Var loss(LossKind kind, const std::vector<Var>& log_probs, const Targets& targets, const Var& s);

// One row per example.
Targets one_hot_targets(const std::vector<prefs::Preference>& truths, const std::vector<int>& heads);
Targets pmf_targets(const std::vector<const data::Pmf*>& pmfs, const std::vector<int>& heads);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;
};

// theta -= lr * lambda * theta, then the bias-corrected Adam update.
void adamw_step(std::vector<Parameter>& params, AdamState& state, const AdamWConfig& config);

}  // namespace prefplan::nn
