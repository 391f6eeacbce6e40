#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "prefplan/cli.hpp"
#include "prefplan/error.hpp"
#include "prefplan/rng.hpp"

namespace prefplan::cli {

using json = nlohmann::json;

std::string ModelCell::id() const { return model + "-" + beta_train.key(); }

eval::Column ModelCell::column() const {
  return {model, nn::to_string(loss), nn::to_string(target), beta_train.key()};
}

ModelCell parse_model_cell(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw Error("CONFIG", "cli", "model '" + spec + "' is not <kind>:<beta_train>");
  ModelCell c;
  c.model = spec.substr(0, colon);
  c.beta_train = sim::NoiseLevel::parse(spec.substr(colon + 1));
  if (c.model == "single_target") {
    c.loss = nn::LossKind::CE;
    c.target = nn::TargetKind::Single;
  } else if (c.model == "distribution") {
    c.loss = nn::LossKind::KL;
    c.target = nn::TargetKind::CleanDistribution;
  } else if (c.model == "noisy_distribution") {
    c.loss = nn::LossKind::KL;
    c.target = nn::TargetKind::NoisyDistribution;
    if (c.beta_train.noiseless()) throw Error("CONFIG", "cli", "noisy_distribution needs a finite beta_train");
  } else {
    throw Error("CONFIG", "cli", "unknown model kind '" + c.model + "'");
  }
  return c;
}

std::vector<ModelCell> all_model_cells() {
  std::vector<ModelCell> out;
  for (const auto& col : eval::table_columns()) {
    if (col.model != "pr_baseline") out.push_back(parse_model_cell(col.model + ":" + col.beta_train));
  }
  return out;
}

json default_config() {
  const std::string data = PREFPLAN_DATA_DIR;
  return {
      {"domain", data + "/kitchen.domain.pddl"},
      {"problem", data + "/kitchen.problem.pddl"},
      {"preferences", data + "/kitchen.preferences.json"},
      {"out", "runs/default"},
      {"seed", 1},
      {"jobs", 1},
      {"planner", {{"depth_bound", 0}, {"max_plans", 1000000}, {"max_expansions", 100000000}}},
      {"dataset", {{"m", 20000}, {"l", 10}, {"betas", {"10", "1", "0.5"}}, {"pool_size", 200}, {"extra_pairs", 4000}}},
      {"train",
       {{"models", "all"},
        {"lr", {1e-3, 1e-4}},
        {"batch", {64, 256}},
        {"seeds", 5},
        {"weight_decay", 0.01},
        {"patience", 60},
        {"eval_fraction", 0.05},
        {"val_fraction", 0.05},
        {"max_epochs", 50},
        {"max_steps", 0},
        {"dims", {{"embed", 32}, {"hidden", 64}, {"choice", 16}, {"query", 128}, {"trunk", 128}, {"trunk_layers", 2}}}}},
      {"eval", {{"beta_eval", {"none", "10", "1", "0.5"}}, {"seeds", 5}}},
      {"gradcheck",
       {{"eps", 1e-5},
        {"per_param", 0},
        {"examples", 2},
        {"dims", {{"embed", 4}, {"hidden", 3}, {"choice", 2}, {"query", 4}, {"trunk", 4}, {"trunk_layers", 2}}}}},
  };
}

namespace {

// Every key of `given` must exist in `schema`; objects are checked recursively.
void check_keys(const json& given, const json& schema, const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) throw Error("CONFIG", "cli", "unknown config key '" + key + "'");
    if (it->is_object() && schema.at(it.key()).is_object()) check_keys(*it, schema.at(it.key()), key);
  }
}

sim::NoiseLevel level_of(const json& j) {
  if (j.is_string()) return sim::NoiseLevel::parse(j.get<std::string>());
  if (j.is_number()) return sim::NoiseLevel::of(j.get<double>());
  if (j.is_null()) return sim::NoiseLevel::none();
  throw Error("CONFIG", "cli", "bad noise level " + j.dump());
}

template <typename T>
T positive(const json& j, const std::string& key) {
  const T v = j.get<T>();
  if (!(v > T{0})) throw Error("CONFIG", "cli", "'" + key + "' must be positive");
  return v;
}

}  // namespace

void apply_set(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("CONFIG", "cli", "--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error("CONFIG", "cli", "bad key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

json load_config(const std::string& path, const std::vector<std::string>& sets) {
  json config = default_config();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error("IO", "cli", "cannot read config '" + path + "'");
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("CONFIG", "cli", path + ": " + e.what());
    }
    check_keys(file, config, "");
    config.merge_patch(file);
  }
  for (const auto& s : sets) {
    json patch = json::object();
    apply_set(patch, s);
    check_keys(patch, config, "");
    config.merge_patch(patch);
  }
  if (const char* env = std::getenv("PREFPLAN_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw Error("CONFIG", "cli", std::string("PREFPLAN_SEED is not an integer: ") + env);
    config["seed"] = v;
  }
  return config;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  try {
    check_keys(j, default_config(), "");
    c.effective = j;
    c.domain = j.at("domain").get<std::string>();
    c.problem = j.at("problem").get<std::string>();
    c.preferences = j.at("preferences").get<std::string>();
    c.out = j.at("out").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.jobs = positive<unsigned>(j.at("jobs"), "jobs");

    const auto& pl = j.at("planner");
    c.generation.depth_bound = pl.at("depth_bound").get<std::size_t>();
    c.generation.max_plans = positive<std::size_t>(pl.at("max_plans"), "planner.max_plans");
    c.generation.max_expansions = positive<std::size_t>(pl.at("max_expansions"), "planner.max_expansions");

    const auto& ds = j.at("dataset");
    c.generation.pool_size = ds.at("pool_size").get<std::size_t>();
    c.generation.extra_pairs = ds.at("extra_pairs").get<std::size_t>();
    c.generation.dataset.m = positive<std::size_t>(ds.at("m"), "dataset.m");
    c.generation.dataset.l = positive<std::size_t>(ds.at("l"), "dataset.l");
    c.generation.dataset.seed = c.seed;
    for (const auto& b : ds.at("betas")) {
      const auto level = level_of(b);
      if (level.noiseless()) throw Error("CONFIG", "cli", "dataset.betas lists noisy levels only");
      c.generation.dataset.betas.push_back(level);
    }

    const auto& tr = j.at("train");
    const auto& models = tr.at("models");
    if (models.is_string() && models.get<std::string>() == "all") {
      c.models = all_model_cells();
    } else {
      for (const auto& m : models) c.models.push_back(parse_model_cell(m.get<std::string>()));
    }
    for (const auto& v : tr.at("lr")) c.lrs.push_back(positive<double>(v, "train.lr"));
    for (const auto& v : tr.at("batch")) c.batches.push_back(positive<std::size_t>(v, "train.batch"));
    if (c.lrs.empty() || c.batches.empty()) throw Error("CONFIG", "cli", "train.lr and train.batch must be non-empty");
    c.train_seeds = positive<std::size_t>(tr.at("seeds"), "train.seeds");
    c.train.weight_decay = tr.at("weight_decay").get<double>();
    c.train.patience = positive<std::size_t>(tr.at("patience"), "train.patience");
    c.train.eval_fraction = positive<double>(tr.at("eval_fraction"), "train.eval_fraction");
    c.train.val_fraction = positive<double>(tr.at("val_fraction"), "train.val_fraction");
    if (c.train.eval_fraction > 1.0 || c.train.val_fraction > 1.0) {
      throw Error("CONFIG", "cli", "train fractions must lie in (0, 1]");
    }
    c.train.max_epochs = positive<std::size_t>(tr.at("max_epochs"), "train.max_epochs");
    c.train.max_steps = tr.at("max_steps").get<std::size_t>();
    json dims = tr.at("dims");
    dims["vocab"] = 0;
    c.train.dims = nn::ModelDims::from_json(dims);

    const auto& ev = j.at("eval");
    for (const auto& b : ev.at("beta_eval")) c.beta_eval.push_back(level_of(b));
    c.eval_seeds = positive<std::size_t>(ev.at("seeds"), "eval.seeds");
  } catch (const json::exception& e) {
    throw Error("CONFIG", "cli", e.what());
  }
  for (const auto& cell : c.models) {
    if (cell.beta_train.noiseless()) continue;
    const auto& betas = c.generation.dataset.betas;
    if (std::find(betas.begin(), betas.end(), cell.beta_train) == betas.end()) {
      throw Error("CONFIG", "cli", "model " + cell.id() + " needs beta " + cell.beta_train.key() + " in dataset.betas");
    }
  }
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

std::uint64_t train_seed(const RunConfig& config, std::size_t replicate) {
  return derive_seed(config.seed, 0x747261696e0000ULL + replicate);
}

std::uint64_t eval_seed(const RunConfig& config, std::size_t replicate) {
  return derive_seed(config.seed, 0x6576616c0000ULL + replicate);
}

Inputs load_inputs(const RunConfig& config) {
  Inputs in;
  auto domain = pddl::load_domain(config.domain);
  auto problem = pddl::load_problem(config.problem, domain);
  in.task = std::make_unique<pddl::Task>(std::move(domain), std::move(problem));
  in.model = std::make_unique<prefs::PreferenceModel>(prefs::PreferenceModel::load(*in.task, config.preferences));
  in.vocab = data::Vocabulary::from_task(*in.task);
  return in;
}

std::string Paths::checkpoint(const ModelCell& cell, std::size_t replicate) const {
  return root + "/checkpoints/" + cell.id() + "/seed" + std::to_string(replicate);
}

std::string Paths::predictions(const std::string& column, const sim::NoiseLevel& level, std::size_t replicate) const {
  return root + "/predictions/" + column + "/beta_eval-" + level.key() + ".seed" + std::to_string(replicate) + ".jsonl";
}

void write_manifest(const RunConfig& config, const std::string& command, const std::vector<std::string>& outputs) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["version"] = PREFPLAN_VERSION;
  m["config_hash"] = config_hash(config.effective);
  m["outputs"] = outputs;
  m["config"] = config.effective;
  const Paths paths{config.out};
  std::filesystem::create_directories(config.out);
  std::ofstream out(paths.manifest(command));
  if (!out) throw Error("IO", "cli", "cannot write manifest in " + config.out);
  out << m.dump(2) << '\n';
}

}  // namespace prefplan::cli
