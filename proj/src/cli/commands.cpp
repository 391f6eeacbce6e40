#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include "prefplan/cli.hpp"
#include "prefplan/error.hpp"

namespace prefplan::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

data::Dataset load_dataset(const RunConfig& config, const Inputs& in) {
  const Paths paths{config.out};
  if (!fs::exists(paths.dataset())) {
    throw Error("IO", "cli", "no dataset at " + paths.dataset() + " (run gen first)");
  }
  const auto vocab = data::Vocabulary::read(paths.vocab());
  if (!(vocab == in.vocab)) throw Error("SCHEMA_MISMATCH", "cli", "vocabulary does not match the task");
  return data::read_dataset(paths.dataset(), *in.task, *in.model, vocab);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

nn::TrainConfig cell_config(const RunConfig& config, const ModelCell& cell, std::size_t replicate) {
  nn::TrainConfig t = config.train;
  t.loss = cell.loss;
  t.target = cell.target;
  t.beta_train = cell.beta_train;
  t.seed = train_seed(config, replicate);
  return t;
}

void save_run(const nn::TrainResult& r, const nn::TrainConfig& t, const ModelCell& cell, std::size_t replicate,
              const std::string& dir) {
  json meta = t.to_json();
  meta["cell"] = cell.id();
  meta["replicate"] = replicate;
  meta["steps"] = r.steps;
  meta["best_step"] = r.best_step;
  meta["best_val_loss"] = r.best_val_loss;
  nn::save_checkpoint(r.model, meta, dir);
  nn::write_train_log(r.log, dir + "/train_log.csv");
}

}  // namespace

void write_predictions(const std::vector<eval::PredictionRecord>& records, const std::string& path) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw Error("IO", "cli", "cannot write " + path);
  auto one_based = [](const prefs::Preference& p) {
    std::vector<int> v;
    for (int x : p.values) v.push_back(x + 1);
    return v;
  };
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["predicted"] = one_based(r.predicted);
    j["truth"] = one_based(r.truth);
    j["consistent"] = r.consistent;
    if (r.consistent_size) j["consistent_size"] = *r.consistent_size;
    if (!r.probabilities.empty()) j["probabilities"] = r.probabilities;
    out << j.dump() << '\n';
  }
}

int cmd_gen(const RunConfig& config, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const Inputs in = load_inputs(config);
  const auto g = data::generate(*in.task, *in.model, config.generation);
  const Paths paths{config.out};
  fs::create_directories(config.out);
  data::write_dataset(g.dataset, in.vocab, paths.dataset());
  in.vocab.write(paths.vocab());
  planner::write_plan_pool_jsonl(g.pool, *in.task, in.model->universe_labels(), paths.plans());
  write_manifest(config, "gen", {paths.dataset(), paths.vocab(), paths.plans()});
  log << "gen: " << g.pool.trajectories.size() << " pool trajectories, pairs " << g.split_pairs[0].size() << "/"
      << g.split_pairs[1].size() << "/" << g.split_pairs[2].size() << ", " << g.dataset.examples.size()
      << " examples, " << g.dataset.noisy_fallbacks << " uniform noisy PMFs, " << fmt(seconds_since(t0)) << " s\n";
  return 0;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  const Inputs in = load_inputs(config);
  const auto dataset = load_dataset(config, in);
  const Paths paths{config.out};
  std::vector<std::string> outputs;
  std::optional<Error> first_error;
  for (const auto& cell : config.models) {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const auto base = cell_config(config, cell, 0);
      auto grid = nn::grid_search(dataset, in.vocab, base, config.lrs, config.batches, config.jobs);
      json cells = json::array();
      for (const auto& gc : grid.cells) {
        json e = {{"lr", gc.lr}, {"batch", gc.batch}};
        e["best_val_loss"] = gc.best_val_loss ? json(*gc.best_val_loss) : json(nullptr);
        if (!gc.error.empty()) e["error"] = gc.error;
        cells.push_back(e);
      }
      const double lr = grid.cells[grid.best].lr;
      const std::size_t batch = grid.cells[grid.best].batch;
      auto chosen = base;
      chosen.lr = lr;
      chosen.batch = batch;
      const std::string dir0 = paths.checkpoint(cell, 0);
      save_run(grid.result, chosen, cell, 0, dir0);
      {
        std::ofstream g(dir0 + "/grid.json");
        g << json{{"cells", cells}, {"best", grid.best}}.dump(2) << '\n';
      }
      outputs.push_back(dir0);
      log << "train " << cell.id() << " seed0: lr " << lr << " batch " << batch << " steps " << grid.result.steps
          << " best val " << fmt(grid.result.best_val_loss) << " (" << fmt(seconds_since(t0)) << " s)\n";
      for (std::size_t k = 1; k < config.train_seeds; ++k) {
        const auto t1 = std::chrono::steady_clock::now();
        auto tc = cell_config(config, cell, k);
        tc.lr = lr;
        tc.batch = batch;
        const auto r = nn::train(dataset, in.vocab, tc);
        save_run(r, tc, cell, k, paths.checkpoint(cell, k));
        outputs.push_back(paths.checkpoint(cell, k));
        log << "train " << cell.id() << " seed" << k << ": steps " << r.steps << " best val " << fmt(r.best_val_loss)
            << " (" << fmt(seconds_since(t1)) << " s)\n";
      }
    } catch (const Error& e) {
      log << "train " << cell.id() << " failed: " << e.code() << " " << e.what() << "\n";
      if (!first_error) first_error = e;
    }
  }
  write_manifest(config, "train", outputs);
  if (first_error) throw *first_error;
  return 0;
}

int cmd_baseline(const RunConfig& config, std::ostream& log) {
  const Inputs in = load_inputs(config);
  const auto dataset = load_dataset(config, in);
  const auto test = dataset.split(data::Split::Test);
  const Paths paths{config.out};
  std::vector<std::string> outputs;
  for (const auto& level : config.beta_eval) {
    std::vector<double> t, a;
    for (std::size_t k = 0; k < config.eval_seeds; ++k) {
      const auto recs = eval::pr_baseline(test, level, *in.model, eval_seed(config, k));
      const auto path = paths.predictions("pr_baseline", level, k);
      write_predictions(recs, path);
      outputs.push_back(path);
      t.push_back(eval::tpr(recs));
      a.push_back(eval::aor(recs));
    }
    const auto ts = eval::summarize(t);
    const auto as = eval::summarize(a);
    log << "baseline beta_eval=" << level.key() << ": TPR " << fmt(ts.mean) << " ± " << fmt(ts.std) << "  AOR "
        << fmt(as.mean) << " ± " << fmt(as.std) << "  expected TPR "
        << fmt(eval::pr_expected_tpr(test, level, *in.model)) << "\n";
  }
  write_manifest(config, "baseline", outputs);
  return 0;
}

int cmd_eval(const RunConfig& config, std::ostream& log) {
  const Inputs in = load_inputs(config);
  const auto dataset = load_dataset(config, in);
  const auto test = dataset.split(data::Split::Test);
  const Paths paths{config.out};
  std::vector<std::string> outputs;
  std::size_t missing = 0;
  for (const auto& cell : config.models) {
    for (std::size_t k = 0; k < config.train_seeds; ++k) {
      nn::Checkpoint ck;
      try {
        ck = nn::load_checkpoint(paths.checkpoint(cell, k));
      } catch (const Error& e) {
        log << "eval " << cell.id() << " seed" << k << ": " << e.code() << " " << e.what() << "\n";
        ++missing;
        continue;
      }
      for (const auto& level : config.beta_eval) {
        const auto recs = eval::nn_predict(ck.model, test, level, in.vocab);
        const auto path = paths.predictions(cell.id(), level, k);
        write_predictions(recs, path);
        outputs.push_back(path);
        log << "eval " << cell.id() << " seed" << k << " beta_eval=" << level.key() << ": TPR "
            << fmt(eval::tpr(recs)) << " AOR " << fmt(eval::aor(recs)) << "\n";
      }
    }
  }
  write_manifest(config, "eval", outputs);
  if (outputs.empty() && missing > 0) throw Error("MISSING_CHECKPOINT", "cli", "no checkpoints to evaluate");
  return 0;
}

int cmd_report(const RunConfig& config, std::ostream& log) {
  const Inputs in = load_inputs(config);
  const auto dataset = load_dataset(config, in);
  const auto test = dataset.split(data::Split::Test);
  const Paths paths{config.out};
  std::vector<eval::Column> columns;
  std::vector<eval::Evaluator> evaluators;
  std::map<std::string, std::uint64_t> seed_index;
  for (std::size_t k = 0; k < config.eval_seeds; ++k) seed_index[std::to_string(eval_seed(config, k))] = k;
  for (const auto& cell : config.models) {
    columns.push_back(cell.column());
    evaluators.push_back([&, cell](const sim::NoiseLevel& level, std::uint64_t seed) {
      const std::size_t k = seed_index.at(std::to_string(seed));
      // Trained replicates pair with evaluation seeds one to one.
      if (k >= config.train_seeds) {
        throw Error("MISSING_CHECKPOINT", "cli", "only " + std::to_string(config.train_seeds) + " trained seeds");
      }
      auto ck = nn::load_checkpoint(paths.checkpoint(cell, k));
      return eval::nn_predict(ck.model, test, level, in.vocab);
    });
  }
  columns.push_back({"pr_baseline", "-", "-", "-"});
  evaluators.push_back([&](const sim::NoiseLevel& level, std::uint64_t seed) {
    return eval::pr_baseline(test, level, *in.model, seed);
  });
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < config.eval_seeds; ++k) seeds.push_back(eval_seed(config, k));
  const auto report = eval::build_report(columns, evaluators, config.beta_eval, seeds);
  eval::write_report_csv(report, paths.report_csv());
  eval::write_report_md(report, paths.report_md());
  write_manifest(config, "report", {paths.report_csv(), paths.report_md()});
  log << eval::report_markdown(report);
  return 0;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& log) {
  const Inputs in = load_inputs(config);
  const auto& gc = config.effective.at("gradcheck");
  auto gen = config.generation;
  gen.dataset.m = 20;
  gen.pool_size = std::min<std::size_t>(gen.pool_size == 0 ? 60 : gen.pool_size, 60);
  gen.extra_pairs = 300;
  const auto g = data::generate(*in.task, *in.model, gen);
  json dims = gc.at("dims");
  dims["vocab"] = in.vocab.size();
  const auto model_dims = nn::ModelDims::from_json(dims);
  const auto examples = gc.at("examples").get<std::size_t>();
  const double eps = gc.at("eps").get<double>();
  const auto per_param = gc.at("per_param").get<std::size_t>();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < examples; ++i) rows.push_back(i);
  double worst = 0.0;
  for (const auto& [kind, target] : {std::pair{nn::LossKind::CE, nn::TargetKind::Single},
                                     std::pair{nn::LossKind::KL, nn::TargetKind::NoisyDistribution}}) {
    nn::TrainConfig tc;
    tc.target = target;
    tc.dims = model_dims;
    if (target == nn::TargetKind::NoisyDistribution) {
      // The noisiest level gives the most diffuse targets.
      if (gen.dataset.betas.empty()) {
        tc.target = nn::TargetKind::CleanDistribution;
      } else {
        tc.beta_train = *std::min_element(gen.dataset.betas.begin(), gen.dataset.betas.end(),
                                          [](const auto& a, const auto& b) { return *a.beta < *b.beta; });
      }
    }
    const auto p = nn::prepare(g.dataset.split(data::Split::Train), in.vocab, tc);
    if (p.inputs.size() < rows.size()) throw Error("CONFIG", "cli", "gradcheck.examples exceeds the toy train split");
    nn::Model model(model_dims, config.seed);
    const auto r = nn::gradcheck(model, nn::make_batch(p, rows), kind, nn::make_targets(p, rows, model_dims.heads), eps,
                                 per_param, config.seed);
    log << "gradcheck " << nn::to_string(kind) << ": params " << model.parameter_count() << " checked " << r.checked
        << " max_rel_error " << r.max_rel_error << " worst " << r.worst << "\n";
    worst = std::max(worst, r.max_rel_error);
  }
  if (!(worst < 1e-4)) throw Error("GRADCHECK", "neural", "max relative error " + std::to_string(worst) + " >= 1e-4");
  return 0;
}

}  // namespace prefplan::cli
