#include "prefplan/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "prefplan/error.hpp"
#include "prefplan/rng.hpp"

namespace prefplan::nn {

nlohmann::json ModelDims::to_json() const {
  return {{"vocab", vocab}, {"embed", embed}, {"hidden", hidden}, {"choice", choice},
          {"query", query}, {"trunk", trunk}, {"trunk_layers", trunk_layers}, {"heads", heads}};
}

ModelDims ModelDims::from_json(const nlohmann::json& j) {
  ModelDims d;
  d.vocab = j.at("vocab").get<int>();
  d.embed = j.value("embed", d.embed);
  d.hidden = j.value("hidden", d.hidden);
  d.choice = j.value("choice", d.choice);
  d.query = j.value("query", d.query);
  d.trunk = j.value("trunk", d.trunk);
  d.trunk_layers = j.value("trunk_layers", d.trunk_layers);
  d.heads = j.value("heads", d.heads);
  return d;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

Batch make_batch(const std::vector<const data::TokenizedQuerySequence*>& sequences) {
  Batch b;
  std::map<std::vector<int>, int> index;
  for (const auto* seq : sequences) {
    for (const auto& q : *seq) {
      index.emplace(q.a, 0);
      index.emplace(q.b, 0);
    }
  }
  for (const auto& [tokens, _] : index) b.trajectories.push_back(tokens);
  std::stable_sort(b.trajectories.begin(), b.trajectories.end(),
                   [](const auto& x, const auto& y) { return x.size() > y.size(); });
  for (std::size_t i = 0; i < b.trajectories.size(); ++i) index[b.trajectories[i]] = static_cast<int>(i);

  b.offsets.push_back(0);
  for (const auto* seq : sequences) {
    // (a, b, B) says the same as (b, a, A), and a TIE says the same either
    // way round. The preferred trajectory always goes first.
    std::vector<data::TokenizedQuery> qs;
    for (const auto& q : *seq) {
      const bool swap = q.choice == data::Vocabulary::kChoiceB || (q.choice == data::Vocabulary::kChoiceTie && q.b < q.a);
      if (swap) {
        qs.push_back({q.b, q.a, q.choice == data::Vocabulary::kChoiceB ? data::Vocabulary::kChoiceA : q.choice});
      } else {
        qs.push_back(q);
      }
    }
    std::sort(qs.begin(), qs.end(), [](const auto& x, const auto& y) {
      return std::tie(x.a, x.b, x.choice) < std::tie(y.a, y.b, y.choice);
    });
    for (const auto& q : qs) {
      b.query_a.push_back(index.at(q.a));
      b.query_b.push_back(index.at(q.b));
      b.query_choice.push_back(q.choice - data::Vocabulary::kChoiceA);
    }
    b.offsets.push_back(static_cast<int>(b.query_a.size()));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, Pcg32& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return m;
}

}  // namespace

Model::Model(const ModelDims& dims, std::uint64_t seed) : dims_(dims) {
  if (dims.vocab <= data::Vocabulary::kFirstAction || dims.embed <= 0 || dims.hidden <= 0 || dims.query <= 0 ||
      dims.trunk <= 0 || dims.choice <= 0 || dims.trunk_layers < 0 || dims.heads.empty()) {
    throw Error("CONFIG", "neural", "invalid model dimensions");
  }
  Pcg32 rng = make_stream(seed, 0x6e6e696eULL);
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols, double bound) {
    params_.push_back(Parameter{std::move(name), uniform(rows, cols, bound, rng), Matrix::Zero(rows, cols)});
  };
  const int h = dims.hidden;
  add("embedding", dims.vocab, dims.embed, 1.0);
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string d = dir;
    add(d + ".w_x", dims.embed, 4 * h, 1.0 / std::sqrt(dims.embed));
    add(d + ".w_h", h, 4 * h, 1.0 / std::sqrt(h));
    add(d + ".b", 1, 4 * h, 1.0 / std::sqrt(h));
    params_.back().value.middleCols(h, h).setOnes();  // forget gate
  }
  add("choice", 3, dims.choice, 1.0);
  const int q_in = 4 * h + dims.choice;
  add("query.w", q_in, dims.query, 1.0 / std::sqrt(q_in));
  add("query.b", 1, dims.query, 1.0 / std::sqrt(q_in));
  int width = dims.query;
  for (int l = 0; l < dims.trunk_layers; ++l) {
    add("trunk" + std::to_string(l) + ".w", width, dims.trunk, 1.0 / std::sqrt(width));
    add("trunk" + std::to_string(l) + ".b", 1, dims.trunk, 1.0 / std::sqrt(width));
    width = dims.trunk;
  }
  for (std::size_t n = 0; n < dims.heads.size(); ++n) {
    add("head" + std::to_string(n) + ".w", width, dims.heads[n], 1.0 / std::sqrt(width));
    add("head" + std::to_string(n) + ".b", 1, dims.heads[n], 1.0 / std::sqrt(width));
  }
  params_.push_back(Parameter{"s", Matrix::Zero(1, static_cast<Eigen::Index>(dims.heads.size())),
                              Matrix::Zero(1, static_cast<Eigen::Index>(dims.heads.size()))});
}

Parameter& Model::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw Error("CONFIG", "neural", "no parameter '" + name + "'");
}

const Parameter& Model::param(const std::string& name) const { return const_cast<Model*>(this)->param(name); }

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void Model::zero_grad() {
  for (auto& p : params_) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
}

Var Model::encode(Tape& tape, const Var& proj, const Var& w_h, const Batch& batch, bool reverse) {
  const auto& trajs = batch.trajectories;
  const Eigen::Index h = dims_.hidden;
  const std::size_t steps = trajs.empty() ? 0 : trajs.front().size();
  // Rows are sorted by decreasing length, so the rows still running at step
  // t are a prefix.
  auto active = [&](std::size_t t) {
    std::size_t n = 0;
    while (n < trajs.size() && trajs[n].size() > t) ++n;
    return static_cast<Eigen::Index>(n);
  };
  Var state = tape.constant(Matrix::Zero(active(0), 2 * h));
  std::vector<Var> finished;
  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::Index n = active(t);
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& tr = trajs[static_cast<std::size_t>(r)];
      ids[static_cast<std::size_t>(r)] = reverse ? tr[tr.size() - 1 - t] : tr[t];
    }
    if (state.rows() != n) state = slice_rows(state, 0, n);
    Var gates = add(gather_rows(proj, std::move(ids)), matmul(slice_cols(state, 0, h), w_h));
    state = lstm_cell(gates, state);
    const Eigen::Index next = active(t + 1);
    if (next < n) finished.push_back(slice_rows(state, next, n - next));
  }
  // Rows finishing last come first in sorted order.
  std::reverse(finished.begin(), finished.end());
  return slice_cols(concat_rows(finished), 0, h);
}

std::vector<Var> Model::forward(Tape& tape, const Batch& batch) {
  auto P = [&](const std::string& name) { return tape.leaf(param(name)); };
  const Var emb = P("embedding");
  std::vector<Var> dirs;
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string d = dir;
    const Var proj = add_row(matmul(emb, P(d + ".w_x")), P(d + ".b"));
    dirs.push_back(encode(tape, proj, P(d + ".w_h"), batch, d == "bwd"));
  }
  const Var enc = concat_cols(dirs);
  // [enc_a | enc_b | choice] * W split by row blocks, so the products are
  // taken once per distinct trajectory instead of once per query.
  const Var wq = P("query.w");
  const Eigen::Index e = enc.cols();
  const Var by_a = matmul(enc, slice_rows(wq, 0, e));
  const Var by_b = matmul(enc, slice_rows(wq, e, e));
  const Var by_choice = matmul(P("choice"), slice_rows(wq, 2 * e, dims_.choice));
  const Var q = tanh(add_row(add(add(gather_rows(by_a, batch.query_a), gather_rows(by_b, batch.query_b)),
                                 gather_rows(by_choice, batch.query_choice)),
                             P("query.b")));
  Var x = segment_mean(q, batch.offsets);
  for (int l = 0; l < dims_.trunk_layers; ++l) {
    const std::string n = "trunk" + std::to_string(l);
    x = tanh(add_row(matmul(x, P(n + ".w")), P(n + ".b")));
  }
  std::vector<Var> out;
  for (std::size_t n = 0; n < dims_.heads.size(); ++n) {
    const std::string name = "head" + std::to_string(n);
    out.push_back(log_softmax(add_row(matmul(x, P(name + ".w")), P(name + ".b"))));
  }
  return out;
}

std::vector<Matrix> Model::predict(const Batch& batch) {
  Tape tape;
  std::vector<Matrix> out;
  for (const auto& lp : forward(tape, batch)) out.push_back(lp.value().array().exp().matrix());
  return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

std::string to_string(LossKind k) { return k == LossKind::CE ? "ce" : "kl"; }

std::string to_string(TargetKind k) {
  switch (k) {
    case TargetKind::Single: return "single";
    case TargetKind::CleanDistribution: return "distribution";
    case TargetKind::NoisyDistribution: return "noisy-distribution";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ce") return LossKind::CE;
  if (s == "kl") return LossKind::KL;
  throw Error("CONFIG", "neural", "unknown loss kind '" + s + "'");
}

TargetKind target_kind_from_string(const std::string& s) {
  if (s == "single") return TargetKind::Single;
  if (s == "distribution") return TargetKind::CleanDistribution;
  if (s == "noisy-distribution") return TargetKind::NoisyDistribution;
  throw Error("CONFIG", "neural", "unknown target kind '" + s + "'");
}

namespace {

constexpr double kLogClamp = -27.631021115928547;  // log(1e-12)

Var weighted(const std::vector<Var>& terms, const Var& s) {
  Var total = sum(s);
  for (std::size_t n = 0; n < terms.size(); ++n) {
    const Var sn = slice_cols(s, static_cast<Eigen::Index>(n), 1);
    total = add(total, mul(exp(scale(sn, -1.0)), terms[n]));
  }
  return total;
}

}  // namespace

Var ce_loss(const std::vector<Var>& log_probs, const Targets& targets, const Var& s) {
  std::vector<Var> terms;
  for (std::size_t n = 0; n < log_probs.size(); ++n) {
    terms.push_back(neg_mean_rowdot(clamp_min(log_probs[n], kLogClamp), targets[n]));
  }
  return weighted(terms, s);
}

Var kl_loss(const std::vector<Var>& log_probs, const Targets& targets, const Var& s) {
  std::vector<Var> terms;
  for (std::size_t n = 0; n < log_probs.size(); ++n) {
    const Matrix& p = targets[n];
    double neg_entropy = 0.0;  // mean_i sum_k p log p
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double x = p.data()[i];
      if (x > 0.0) neg_entropy += x * std::log(x);
    }
    neg_entropy /= static_cast<double>(p.rows());
    terms.push_back(add_scalar(neg_mean_rowdot(clamp_min(log_probs[n], kLogClamp), p), neg_entropy));
  }
  return weighted(terms, s);
}

Var loss(LossKind kind, const std::vector<Var>& log_probs, const Targets& targets, const Var& s) {
  return kind == LossKind::CE ? ce_loss(log_probs, targets, s) : kl_loss(log_probs, targets, s);
}

Targets one_hot_targets(const std::vector<prefs::Preference>& truths, const std::vector<int>& heads) {
  Targets t;
  for (std::size_t n = 0; n < heads.size(); ++n) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(truths.size()), heads[n]);
    for (std::size_t i = 0; i < truths.size(); ++i) m(static_cast<Eigen::Index>(i), truths[i].values[n]) = 1.0;
    t.push_back(std::move(m));
  }
  return t;
}

Targets pmf_targets(const std::vector<const data::Pmf*>& pmfs, const std::vector<int>& heads) {
  Targets t;
  for (std::size_t n = 0; n < heads.size(); ++n) {
    Matrix m(static_cast<Eigen::Index>(pmfs.size()), heads[n]);
    for (std::size_t i = 0; i < pmfs.size(); ++i) {
      for (int k = 0; k < heads[n]; ++k) m(static_cast<Eigen::Index>(i), k) = (*pmfs[i])[n][static_cast<std::size_t>(k)];
    }
    t.push_back(std::move(m));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

void adamw_step(std::vector<Parameter>& params, AdamState& state, const AdamWConfig& c) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const Matrix g = p.grad.size() ? p.grad : Matrix::Zero(p.value.rows(), p.value.cols());
    p.value *= 1.0 - c.lr * c.weight_decay;
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.value.array() -= c.lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + c.eps);
  }
}

}  // namespace prefplan::nn
