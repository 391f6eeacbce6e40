#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "fixtures.hpp"
#include "prefplan/dataset.hpp"
#include "prefplan/error.hpp"
#include "prefplan/nn/train.hpp"
#include "prefplan/rng.hpp"

using namespace prefplan;
using namespace prefplan::nn;

namespace {

const data::Generated& small() {
  static const data::Generated g = [] {
    data::GenerationConfig c;
    c.pool_size = 60;
    c.extra_pairs = 300;
    c.dataset.m = 300;
    c.dataset.l = 10;
    c.dataset.betas = {sim::NoiseLevel::of(10), sim::NoiseLevel::of(1), sim::NoiseLevel::of(0.5)};
    c.dataset.seed = 5;
    return data::generate(fixtures::kitchen(), fixtures::kitchen_model(), c);
  }();
  return g;
}

const data::Vocabulary& vocab() {
  static const data::Vocabulary v = data::Vocabulary::from_task(fixtures::kitchen());
  return v;
}

ModelDims toy_dims() {
  ModelDims d;
  d.vocab = static_cast<int>(vocab().size());
  d.embed = 4;
  d.hidden = 3;
  d.choice = 2;
  d.query = 4;
  d.trunk = 4;
  return d;
}

Prepared prepared(TargetKind target, sim::NoiseLevel level = {}) {
  TrainConfig c;
  c.target = target;
  c.beta_train = level;
  return prepare(small().dataset.split(data::Split::Train), vocab(), c);
}

std::vector<std::size_t> range(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Pcg32& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * rng.uniform() - 1.0;
  return m;
}

// Max relative error of d f / d x against central differences.
double op_gradcheck(const Matrix& x0, const std::function<Var(const Var&)>& f) {
  Parameter p{"x", x0, Matrix::Zero(x0.rows(), x0.cols())};
  {
    Tape t;
    Var out = f(t.leaf(p));
    t.backward(out);
  }
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x0.size(); ++k) {
    const double saved = p.value.data()[k];
    auto eval = [&](double v) {
      p.value.data()[k] = v;
      Tape t;
      return f(t.leaf(p)).value()(0, 0);
    };
    const double n = (eval(saved + 1e-5) - eval(saved - 1e-5)) / 2e-5;
    p.value.data()[k] = saved;
    const double a = p.grad.data()[k];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}));
  }
  return worst;
}

}  // namespace

TEST_CASE("autodiff ops match central differences") {
  Pcg32 rng(3);
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix w = random_matrix(4, 2, rng);
  const Matrix t = random_matrix(3, 4, rng);
  auto C = [](const Var& v, const Matrix& m) { return v.tape()->constant(m); };
  CHECK(op_gradcheck(x, [&](const Var& v) { return sum(matmul(v, C(v, w))); }) < 1e-6);
  CHECK(op_gradcheck(x, [&](const Var& v) { return sum(mul(tanh(v), exp(v))); }) < 1e-6);
  CHECK(op_gradcheck(x, [&](const Var& v) { return sum(mul(softmax(v), C(v, t))); }) < 1e-6);
  CHECK(op_gradcheck(x, [&](const Var& v) { return neg_mean_rowdot(log_softmax(v), t); }) < 1e-6);
  CHECK(op_gradcheck(x, [&](const Var& v) { return sum(mul(clamp_min(v, 0.0), C(v, t))); }) < 1e-6);
  CHECK(op_gradcheck(x, [&](const Var& v) {
          return sum(mul(segment_mean(concat_rows({v, slice_rows(v, 1, 2)}), {0, 2, 5}), C(v, t.topRows(2))));
        }) < 1e-6);
  const Matrix u = random_matrix(4, 5, rng);
  CHECK(op_gradcheck(x, [&](const Var& v) {
          return sum(mul(gather_rows(concat_cols({slice_cols(v, 0, 1), scale(v, 2.0)}), {2, 0, 2, 1}), C(v, u)));
        }) < 1e-6);
  const Matrix gates = random_matrix(2, 12, rng);
  const Matrix weights = random_matrix(2, 6, rng);
  CHECK(op_gradcheck(random_matrix(2, 6, rng), [&](const Var& v) {
          return sum(mul(lstm_cell(C(v, gates), add_scalar(v, 0.1)), C(v, weights)));
        }) < 1e-6);
  CHECK(op_gradcheck(random_matrix(2, 12, rng), [&](const Var& v) {
          const Var state = v.tape()->constant(Matrix::Constant(2, 6, 0.2));
          return sum(mul(lstm_cell(v, state), C(v, Matrix::Constant(2, 6, 0.7))));
        }) < 1e-6);
}

TEST_CASE("batch construction") {
  const Prepared p = prepared(TargetKind::Single);
  const Batch b = make_batch(p, {0, 1, 2});
  CHECK(b.examples() == 3);
  CHECK(b.offsets == std::vector<int>{0, 10, 20, 30});
  for (std::size_t i = 1; i < b.trajectories.size(); ++i) {
    CHECK(b.trajectories[i - 1].size() >= b.trajectories[i].size());
    CHECK(b.trajectories[i - 1] != b.trajectories[i]);
  }
  for (std::size_t q = 0; q < b.query_a.size(); ++q) {
    CHECK(b.query_a[q] != b.query_b[q]);
    CHECK(b.query_choice[q] >= 0);
    CHECK(b.query_choice[q] <= 2);
  }
}

TEST_CASE("outputs are distributions and ignore query order") {
  Model m(toy_dims(), 11);
  const Prepared p = prepared(TargetKind::Single);
  auto probs = m.predict(make_batch(p, {0, 1, 2, 3}));
  REQUIRE(probs.size() == 3);
  for (std::size_t n = 0; n < probs.size(); ++n) {
    CHECK(probs[n].rows() == 4);
    CHECK(probs[n].cols() == toy_dims().heads[n]);
    CHECK((probs[n].array() >= 0.0).all());
    for (Eigen::Index r = 0; r < 4; ++r) CHECK(probs[n].row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  Pcg32 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<data::TokenizedQuerySequence> seqs(p.inputs.begin(), p.inputs.begin() + 4);
    for (auto& s : seqs) shuffle(s, rng);
    std::vector<const data::TokenizedQuerySequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    const auto again = m.predict(make_batch(ptrs));
    for (std::size_t n = 0; n < probs.size(); ++n) CHECK(again[n] == probs[n]);
  }
}

TEST_CASE("mirrored queries give identical outputs") {
  Model m(toy_dims(), 12);
  const Prepared p = prepared(TargetKind::Single);
  std::vector<data::TokenizedQuerySequence> seqs(p.inputs.begin(), p.inputs.begin() + 4);
  std::vector<const data::TokenizedQuerySequence*> ptrs;
  for (const auto& s : seqs) ptrs.push_back(&s);
  const auto base = m.predict(make_batch(ptrs));
  for (auto& s : seqs) {
    for (auto& q : s) {
      std::swap(q.a, q.b);
      if (q.choice == data::Vocabulary::kChoiceA) {
        q.choice = data::Vocabulary::kChoiceB;
      } else if (q.choice == data::Vocabulary::kChoiceB) {
        q.choice = data::Vocabulary::kChoiceA;
      }
    }
  }
  const auto mirrored = m.predict(make_batch(ptrs));
  for (std::size_t n = 0; n < base.size(); ++n) CHECK(mirrored[n] == base[n]);
  // Flipping the choice alone changes the evidence.
  for (auto& s : seqs) {
    for (auto& q : s) {
      if (q.choice != data::Vocabulary::kChoiceTie) std::swap(q.a, q.b);
    }
  }
  const auto flipped = m.predict(make_batch(ptrs));
  bool differs = false;
  for (std::size_t n = 0; n < base.size(); ++n) differs = differs || !(flipped[n] == base[n]);
  CHECK(differs);
}

TEST_CASE("zero weights give softmax of the head bias") {
  Model m(toy_dims(), 1);
  for (auto& p : m.params()) p.value.setZero();
  Matrix bias(1, 3);
  bias << 0.5, -1.0, 2.0;
  m.param("head0.b").value = bias;
  const auto probs = m.predict(make_batch(prepared(TargetKind::Single), {0, 1, 2}));
  const Eigen::ArrayXd e = bias.row(0).transpose().array().exp();
  for (Eigen::Index r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) CHECK(probs[0](r, k) == doctest::Approx(e(k) / e.sum()).epsilon(1e-12));
    CHECK(probs[1](r, 0) == doctest::Approx(0.5));
  }
}

TEST_CASE("loss closed forms") {
  Tape t;
  const Var s = t.constant(Matrix::Zero(1, 1));
  const Var uniform3 = t.constant(Matrix::Constant(2, 3, std::log(1.0 / 3.0)));
  const Var uniform2 = t.constant(Matrix::Constant(2, 2, std::log(0.5)));
  Matrix one_hot3 = Matrix::Zero(2, 3);
  one_hot3(0, 1) = 1.0;
  one_hot3(1, 2) = 1.0;
  Matrix one_hot2 = Matrix::Zero(2, 2);
  one_hot2(0, 0) = 1.0;
  one_hot2(1, 0) = 1.0;
  CHECK(ce_loss({uniform3}, {one_hot3}, s).value()(0, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(kl_loss({uniform2}, {one_hot2}, s).value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(kl_loss({uniform3}, {Matrix::Constant(2, 3, 1.0 / 3.0)}, s).value()(0, 0) == doctest::Approx(0.0).epsilon(1e-14));

  // Task weighting: exp(-s) * term + s.
  const Var s2 = t.constant(Matrix::Constant(1, 1, 0.7));
  CHECK(ce_loss({uniform3}, {one_hot3}, s2).value()(0, 0) ==
        doctest::Approx(std::exp(-0.7) * std::log(3.0) + 0.7).epsilon(1e-14));

  // Probabilities below 1e-12 are clamped.
  Matrix lp(1, 2);
  lp << 0.0, -1000.0;
  Matrix tgt(1, 2);
  tgt << 0.0, 1.0;
  CHECK(ce_loss({t.constant(lp)}, {tgt}, s).value()(0, 0) == doctest::Approx(-std::log(1e-12)));

  // All mass on the target costs nothing.
  Matrix sure(1, 2);
  sure << -1000.0, 0.0;
  CHECK(ce_loss({t.constant(sure)}, {tgt}, s).value()(0, 0) == 0.0);
  CHECK(kl_loss({t.constant(sure)}, {tgt}, s).value()(0, 0) == 0.0);
}

TEST_CASE("KL is non-negative and equals CE for one-hot targets") {
  Pcg32 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index rows = 1 + rng.bounded(5);
    const Eigen::Index k = 2 + rng.bounded(4);
    Tape t;
    const Var lp = log_softmax(t.constant(random_matrix(rows, k, rng) * 4.0));
    Matrix p = random_matrix(rows, k, rng).array().abs();
    if (trial % 3 == 0) p.col(0).setZero();
    for (Eigen::Index r = 0; r < rows; ++r) p.row(r) /= p.row(r).sum();
    const Var s = t.constant(Matrix::Zero(1, 1));
    CHECK(kl_loss({lp}, {p}, s).value()(0, 0) >= -1e-12);
    Matrix oh = Matrix::Zero(rows, k);
    for (Eigen::Index r = 0; r < rows; ++r) oh(r, rng.bounded(static_cast<std::uint32_t>(k))) = 1.0;
    CHECK(kl_loss({lp}, {oh}, s).value()(0, 0) == doctest::Approx(ce_loss({lp}, {oh}, s).value()(0, 0)).epsilon(1e-13));
  }
}

TEST_CASE("model gradients match central differences") {
  const auto heads = toy_dims().heads;
  for (LossKind kind : {LossKind::CE, LossKind::KL}) {
    Model m(toy_dims(), 21);
    m.param("s").value << 0.3, -0.2, 0.1;
    const Prepared p = prepared(kind == LossKind::CE ? TargetKind::Single : TargetKind::NoisyDistribution,
                                sim::NoiseLevel::of(1));
    const std::vector<std::size_t> rows{0, 1, 2};
    const auto report = gradcheck(m, make_batch(p, rows), kind, make_targets(p, rows, heads));
    INFO(to_string(kind), " worst ", report.worst, " ", report.max_rel_error);
    CHECK(report.checked == m.parameter_count());
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("unused parameters get zero gradient and gradients are deterministic") {
  Model m(toy_dims(), 2);
  const Prepared p = prepared(TargetKind::Single);
  const std::vector<std::size_t> rows{0, 1};
  const Batch b = make_batch(p, rows);
  const Targets t = make_targets(p, rows, toy_dims().heads);
  auto grads = [&] {
    m.zero_grad();
    Tape tape;
    const Var l = loss(LossKind::CE, m.forward(tape, b), t, tape.leaf(m.param("s")));
    tape.backward(l);
    std::vector<Matrix> g;
    for (const auto& prm : m.params()) g.push_back(prm.grad);
    return g;
  };
  const auto g1 = grads();
  const auto g2 = grads();
  CHECK(g1 == g2);
  // PAD never appears in a trajectory.
  CHECK(m.param("embedding").grad.row(data::Vocabulary::kPad).isZero(0.0));
  CHECK(!m.param("embedding").grad.row(data::Vocabulary::kBos).isZero(0.0));
}

TEST_CASE("AdamW closed form") {
  std::vector<Parameter> ps{{"w", Matrix::Constant(1, 2, 2.0), Matrix::Zero(1, 2)}};
  ps[0].grad << 0.5, -3.0;
  AdamState st;
  const AdamWConfig c{0.1, 0.9, 0.999, 1e-8, 0.01};
  adamw_step(ps, st, c);
  // Bias-corrected m / sqrt(v) is sign(g) on the first step.
  CHECK(ps[0].value(0, 0) == doctest::Approx(2.0 * (1 - 0.1 * 0.01) - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(ps[0].value(0, 1) == doctest::Approx(2.0 * (1 - 0.1 * 0.01) + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  const double w1 = ps[0].value(0, 0);
  ps[0].grad << 1.0, 0.0;
  adamw_step(ps, st, c);
  const double m2 = (0.9 * 0.1 * 0.5 + 0.1 * 1.0) / (1 - 0.81);
  const double v2 = (0.999 * 0.001 * 0.25 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
  CHECK(ps[0].value(0, 0) == doctest::Approx(w1 * (1 - 0.001) - 0.1 * m2 / (std::sqrt(v2) + 1e-8)).epsilon(1e-13));
  CHECK(st.step == 2);
}

TEST_CASE("AdamW with zero gradient") {
  std::vector<Parameter> ps{{"w", Matrix::Constant(2, 2, -1.5), Matrix::Zero(2, 2)}};
  AdamState st;
  adamw_step(ps, st, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  CHECK(ps[0].value == Matrix::Constant(2, 2, -1.5));
  adamw_step(ps, st, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.5});
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(ps[0].value.data()[i] == doctest::Approx(-1.5 * (1 - 0.05)).epsilon(1e-15));
}

TEST_CASE("early stopping counts strict improvements") {
  EarlyStopping flat(60);
  std::size_t stopped_at = 0;
  for (std::size_t e = 0; e < 200; ++e) {
    if (flat.update(1.0)) {
      stopped_at = e;
      break;
    }
  }
  CHECK(stopped_at == 60);

  EarlyStopping s(3);
  CHECK_FALSE(s.update(5.0));
  CHECK_FALSE(s.update(4.0));
  CHECK(s.improved());
  CHECK_FALSE(s.update(4.0));
  CHECK_FALSE(s.update(4.5));
  CHECK(s.update(4.0));
  CHECK(s.best() == 4.0);
}

TEST_CASE("training overfits a small set") {
  ModelDims d;
  d.vocab = static_cast<int>(vocab().size());
  Model m(d, 3);
  const Prepared p = prepared(TargetKind::Single);
  const auto rows = range(std::min<std::size_t>(200, p.inputs.size()));
  const Batch b = make_batch(p, rows);
  const Targets t = make_targets(p, rows, d.heads);
  auto plain_ce = [&] {
    const auto probs = m.predict(b);
    double total = 0.0;
    for (std::size_t n = 0; n < probs.size(); ++n) {
      total -= (t[n].array() * probs[n].array().max(1e-12).log()).sum() / static_cast<double>(rows.size());
    }
    return total;
  };
  const double initial = plain_ce();
  AdamState st;
  for (int step = 0; step < 100; ++step) {
    m.zero_grad();
    Tape tape;
    const Var l = loss(LossKind::CE, m.forward(tape, b), t, tape.leaf(m.param("s")));
    tape.backward(l);
    adamw_step(m.params(), st, AdamWConfig{1e-2, 0.9, 0.999, 1e-8, 0.0});
  }
  const double final_ce = plain_ce();
  INFO("initial ", initial, " final ", final_ce);
  CHECK(final_ce < 0.1 * initial);
}

TEST_CASE("training is deterministic and checkpoints round trip") {
  TrainConfig c;
  c.dims = toy_dims();
  c.max_steps = 12;
  c.batch = 16;
  c.seed = 9;
  c.loss = LossKind::KL;
  c.target = TargetKind::NoisyDistribution;
  c.beta_train = sim::NoiseLevel::of(10);
  const auto r1 = train(small().dataset, vocab(), c);
  const auto r2 = train(small().dataset, vocab(), c);
  CHECK(r1.steps == 12);
  CHECK(r1.log.size() == r2.log.size());
  CHECK(r1.log.front().step == 0);
  CHECK_FALSE(r1.log.front().train_loss.has_value());
  for (std::size_t i = 0; i < r1.model.params().size(); ++i) {
    CHECK(r1.model.params()[i].value == r2.model.params()[i].value);
  }

  const auto dir = (std::filesystem::temp_directory_path() / "prefplan_test_ckpt").string();
  std::filesystem::remove_all(dir);
  save_checkpoint(r1.model, c.to_json(), dir);
  auto ck = load_checkpoint(dir);
  CHECK(ck.model.dims() == r1.model.dims());
  CHECK(TrainConfig::from_json(ck.config).to_json() == c.to_json());
  Model copy = r1.model;
  const Batch b = make_batch(prepared(TargetKind::Single), {0, 1, 2});
  CHECK(ck.model.predict(b) == copy.predict(b));

  write_train_log(r1.log, dir + "/train_log.csv");
  std::ifstream log(dir + "/train_log.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "step,train_loss,val_loss,patience");

  {
    std::ofstream m(dir + "/manifest.json");
    m << R"({"schema":"other"})";
  }
  try {
    load_checkpoint(dir);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "SCHEMA_MISMATCH");
  }
  std::filesystem::remove_all(dir);
  try {
    load_checkpoint(dir);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "MISSING_CHECKPOINT");
  }
}

TEST_CASE("grid search picks the lowest validation loss in grid order") {
  TrainConfig c;
  c.dims = toy_dims();
  c.max_steps = 6;
  c.seed = 4;
  const auto g1 = grid_search(small().dataset, vocab(), c, {1e-2, 1e-3}, {8, 16}, 1);
  const auto g2 = grid_search(small().dataset, vocab(), c, {1e-2, 1e-3}, {8, 16}, 3);
  REQUIRE(g1.cells.size() == 4);
  CHECK(g1.cells[1].lr == 1e-2);
  CHECK(g1.cells[1].batch == 16);
  for (std::size_t i = 0; i < 4; ++i) {
    REQUIRE(g1.cells[i].best_val_loss.has_value());
    CHECK(*g1.cells[i].best_val_loss >= *g1.cells[g1.best].best_val_loss);
    CHECK(*g1.cells[i].best_val_loss == *g2.cells[i].best_val_loss);
  }
  CHECK(g1.best == g2.best);

  TrainConfig bad = c;
  bad.target = TargetKind::NoisyDistribution;  // no beta_train
  CHECK_THROWS_AS(grid_search(small().dataset, vocab(), bad, {1e-3}, {8}, 1), Error);
}
