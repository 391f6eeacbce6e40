#include "prefplan/nn/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "prefplan/error.hpp"
#include "prefplan/rng.hpp"

namespace prefplan::nn {

nlohmann::json TrainConfig::to_json() const {
  return {{"loss", to_string(loss)},
          {"target", to_string(target)},
          {"beta_train", beta_train.key()},
          {"lr", lr},
          {"batch", batch},
          {"weight_decay", weight_decay},
          {"patience", patience},
          {"eval_fraction", eval_fraction},
          {"val_fraction", val_fraction},
          {"max_epochs", max_epochs},
          {"max_steps", max_steps},
          {"seed", seed},
          {"dims", dims.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("loss")) c.loss = loss_kind_from_string(j.at("loss").get<std::string>());
  if (j.contains("target")) c.target = target_kind_from_string(j.at("target").get<std::string>());
  if (j.contains("beta_train")) c.beta_train = sim::NoiseLevel::parse(j.at("beta_train").get<std::string>());
  c.lr = j.value("lr", c.lr);
  c.batch = j.value("batch", c.batch);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.patience = j.value("patience", c.patience);
  c.eval_fraction = j.value("eval_fraction", c.eval_fraction);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  if (j.contains("dims")) {
    nlohmann::json d = j.at("dims");
    if (!d.contains("vocab")) d["vocab"] = 0;
    c.dims = ModelDims::from_json(d);
  }
  return c;
}

bool EarlyStopping::update(double loss) {
  improved_ = evaluations_ == 0 || loss < best_;
  ++evaluations_;
  if (improved_) {
    best_ = loss;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

Prepared prepare(const std::vector<const data::Example*>& examples, const data::Vocabulary& vocab,
                 const TrainConfig& config) {
  Prepared p;
  for (const auto* ex : examples) {
    p.inputs.push_back(data::tokenize(*ex, config.beta_train, vocab));
    std::vector<std::vector<double>> t;
    switch (config.target) {
      case TargetKind::Single:
        for (std::size_t n = 0; n < ex->ground_truth.values.size(); ++n) {
          std::vector<double> row(static_cast<std::size_t>(config.dims.heads.at(n)), 0.0);
          row.at(static_cast<std::size_t>(ex->ground_truth.values[n])) = 1.0;
          t.push_back(std::move(row));
        }
        break;
      case TargetKind::CleanDistribution: t = ex->pmf_clean; break;
      case TargetKind::NoisyDistribution: t = ex->pmf(config.beta_train); break;
    }
    p.targets.push_back(std::move(t));
  }
  return p;
}

Batch make_batch(const Prepared& data, const std::vector<std::size_t>& rows) {
  std::vector<const data::TokenizedQuerySequence*> seqs;
  seqs.reserve(rows.size());
  for (auto r : rows) seqs.push_back(&data.inputs.at(r));
  return make_batch(seqs);
}

Targets make_targets(const Prepared& data, const std::vector<std::size_t>& rows, const std::vector<int>& heads) {
  Targets t;
  for (std::size_t n = 0; n < heads.size(); ++n) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), heads[n]);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = data.targets.at(rows[i]).at(n);
      for (int k = 0; k < heads[n]; ++k) m(static_cast<Eigen::Index>(i), k) = row.at(static_cast<std::size_t>(k));
    }
    t.push_back(std::move(m));
  }
  return t;
}

namespace {

Var batch_loss(Model& model, Tape& tape, const Batch& batch, LossKind kind, const Targets& targets) {
  auto log_probs = model.forward(tape, batch);
  return loss(kind, log_probs, targets, tape.leaf(model.param("s")));
}

double loss_value(Model& model, const Batch& batch, LossKind kind, const Targets& targets) {
  Tape tape;
  return batch_loss(model, tape, batch, kind, targets).value()(0, 0);
}

}  // namespace

double evaluate_loss(Model& model, const Prepared& data, const std::vector<std::size_t>& rows, LossKind kind) {
  constexpr std::size_t kChunk = 256;
  double total = 0.0;
  for (std::size_t begin = 0; begin < rows.size(); begin += kChunk) {
    const std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                         rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), begin + kChunk)));
    // The loss is affine in the per-head means, so chunk losses average exactly.
    total += loss_value(model, make_batch(data, chunk), kind, make_targets(data, chunk, model.dims().heads)) *
             static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(rows.size());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train(const data::Dataset& dataset, const data::Vocabulary& vocab, const TrainConfig& config_in) {
  TrainConfig config = config_in;
  config.dims.vocab = static_cast<int>(vocab.size());
  if (config.batch == 0 || config.lr <= 0.0 || config.eval_fraction <= 0.0 || config.val_fraction <= 0.0) {
    throw Error("CONFIG", "neural", "batch, lr, eval_fraction and val_fraction must be positive");
  }
  if (config.target == TargetKind::NoisyDistribution && config.beta_train.noiseless()) {
    throw Error("CONFIG", "neural", "noisy-distribution targets need a finite beta_train");
  }
  const Prepared train_data = prepare(dataset.split(data::Split::Train), vocab, config);
  const Prepared val_data = prepare(dataset.split(data::Split::Val), vocab, config);
  if (train_data.inputs.empty() || val_data.inputs.empty()) {
    throw Error("CONFIG", "neural", "train and val splits must be non-empty");
  }

  TrainResult result;
  result.model = Model(config.dims, derive_seed(config.seed, 0x696e6974));
  Model& model = result.model;
  Model best = model;
  AdamState adam;
  const AdamWConfig opt{config.lr, 0.9, 0.999, 1e-8, config.weight_decay};
  Pcg32 order_rng = make_stream(config.seed, 0x6f72646572);
  Pcg32 val_rng = make_stream(config.seed, 0x76616c);

  const std::size_t n_train = train_data.inputs.size();
  const std::size_t steps_per_epoch = (n_train + config.batch - 1) / config.batch;
  const auto eval_every = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.eval_fraction * static_cast<double>(steps_per_epoch))));
  const std::size_t val_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.val_fraction * static_cast<double>(val_data.inputs.size()))), 1,
      val_data.inputs.size());

  EarlyStopping stopper(config.patience);
  double train_sum = 0.0;
  std::size_t train_n = 0;
  auto evaluate = [&](std::size_t step) {
    const auto rows = sample_without_replacement(val_data.inputs.size(), val_count, val_rng);
    const double v = evaluate_loss(model, val_data, rows, config.loss);
    if (!std::isfinite(v)) throw Error("DIVERGENCE", "neural", "non-finite validation loss at step " + std::to_string(step));
    const bool stop = stopper.update(v);
    LogRow row{step, std::nullopt, v, stopper.since_best()};
    if (train_n > 0) row.train_loss = train_sum / static_cast<double>(train_n);
    train_sum = 0.0;
    train_n = 0;
    result.log.push_back(row);
    if (stopper.improved()) {
      best = model;
      result.best_step = step;
      result.best_val_loss = v;
    }
    return stop;
  };

  std::size_t step = 0;
  bool stop = evaluate(0);
  std::vector<std::size_t> order(n_train);
  for (std::size_t epoch = 0; !stop && epoch < config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, order_rng);
    for (std::size_t begin = 0; begin < n_train && !stop; begin += config.batch) {
      if (config.max_steps > 0 && step >= config.max_steps) {
        stop = true;
        break;
      }
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, begin + config.batch)));
      model.zero_grad();
      Tape tape;
      const Var l = batch_loss(model, tape, make_batch(train_data, rows), config.loss,
                               make_targets(train_data, rows, config.dims.heads));
      const double lv = l.value()(0, 0);
      if (!std::isfinite(lv)) throw Error("DIVERGENCE", "neural", "non-finite training loss at step " + std::to_string(step));
      tape.backward(l);
      adamw_step(model.params(), adam, opt);
      ++step;
      train_sum += lv;
      ++train_n;
      if (step % eval_every == 0) {
        stop = evaluate(step);
        result.early_stopped = stop;
      }
    }
  }
  result.steps = step;
  result.model = std::move(best);
  return result;
}

void write_train_log(const std::vector<LogRow>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("IO", "neural", "cannot write " + path);
  out.precision(17);
  out << "step,train_loss,val_loss,patience\n";
  for (const auto& r : log) {
    out << r.step << ',';
    if (r.train_loss) out << *r.train_loss;
    out << ',' << r.val_loss << ',' << r.patience << '\n';
  }
}

GridResult grid_search(const data::Dataset& dataset, const data::Vocabulary& vocab, const TrainConfig& base,
                       const std::vector<double>& lrs, const std::vector<std::size_t>& batches, unsigned jobs) {
  GridResult grid;
  for (double lr : lrs) {
    for (std::size_t b : batches) grid.cells.push_back(GridCell{lr, b, std::nullopt, {}});
  }
  if (grid.cells.empty()) throw Error("CONFIG", "neural", "empty hyperparameter grid");
  std::vector<std::optional<TrainResult>> results(grid.cells.size());
  std::vector<std::exception_ptr> errors(grid.cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < grid.cells.size();) {
      TrainConfig c = base;
      c.lr = grid.cells[i].lr;
      c.batch = grid.cells[i].batch;
      try {
        results[i] = train(dataset, vocab, c);
        grid.cells[i].best_val_loss = results[i]->best_val_loss;
      } catch (const std::exception& e) {
        grid.cells[i].error = e.what();
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(grid.cells.size()));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    if (!grid.cells[i].best_val_loss) continue;
    if (!best || *grid.cells[i].best_val_loss < *grid.cells[*best].best_val_loss) best = i;
  }
  if (!best) std::rethrow_exception(errors.front());
  grid.best = *best;
  grid.result = std::move(*results[*best]);
  return grid;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

GradcheckReport gradcheck(Model& model, const Batch& batch, LossKind kind, const Targets& targets, double eps,
                          std::size_t per_param, std::uint64_t seed) {
  model.zero_grad();
  {
    Tape tape;
    const Var l = batch_loss(model, tape, batch, kind, targets);
    tape.backward(l);
  }
  GradcheckReport report;
  Pcg32 rng = make_stream(seed, 0x67726164);
  for (auto& p : model.params()) {
    const auto size = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (per_param > 0 && per_param < size) idx = sample_without_replacement(size, per_param, rng);
    for (std::size_t k : idx) {
      double& w = p.value.data()[k];
      const double saved = w;
      w = saved + eps;
      const double up = loss_value(model, batch, kind, targets);
      w = saved - eps;
      const double down = loss_value(model, batch, kind, targets);
      w = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p.grad.data()[k];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      ++report.checked;
      if (rel > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = rel;
        report.worst = p.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return report;
}

}  // namespace prefplan::nn
