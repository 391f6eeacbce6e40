#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace prefplan::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape as value once zero_grad() ran
};

class Tape;

// Handle to a node recorded on a tape. Every tensor here is rank 2; a
// scalar is 1x1.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records operations in creation order, which is a topological order, and
// replays their backward rules in reverse.
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows in
    bool requires_grad = false;
    Parameter* param = nullptr;  // leaves bound to a parameter
    std::function<void(Tape&, Node&)> backward;
  };

  Var constant(Matrix value);
  // The parameter's value is copied in; backward() adds into param.grad.
  Var leaf(Parameter& param);

  Var record(Matrix value, bool requires_grad, std::function<void(Tape&, Node&)> backward);

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  bool needs_grad(const Var& v) const { return node(v.id()).requires_grad; }
  // grad(v) += g, allocating on first use.
  void accumulate(const Var& v, const Matrix& g);
  template <typename Expr>
  void accumulate_block(const Var& v, Eigen::Index r0, Eigen::Index c0, const Expr& g) {
    Node& n = node(v.id());
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad.block(r0, c0, g.rows(), g.cols()) += g;
  }

  // grad(v) += lhs * rhs without a temporary.
  template <typename L, typename R>
  void accumulate_product(const Var& v, const L& lhs, const R& rhs) {
    Node& n = node(v.id());
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad.noalias() = lhs * rhs;
    } else {
      n.grad.noalias() += lhs * rhs;
    }
  }

  // Seeds d loss / d loss = 1 and runs every backward rule once.
  void backward(const Var& loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
// x (n x m) + bias (1 x m) broadcast over rows.
Var add_row(const Var& x, const Var& bias);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& x, double c);
Var add_scalar(const Var& x, double c);
Var tanh(const Var& x);
Var exp(const Var& x);
Var sum(const Var& x);  // 1x1
Var gather_rows(const Var& table, std::vector<int> ids);
Var slice_rows(const Var& x, Eigen::Index r0, Eigen::Index n);
Var slice_cols(const Var& x, Eigen::Index c0, Eigen::Index n);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
// Row means over consecutive segments [offsets[k], offsets[k + 1]).
Var segment_mean(const Var& x, std::vector<int> offsets);
Var log_softmax(const Var& x);  // row-wise
Var softmax(const Var& x);      // row-wise
// max(x, c) with zero gradient where clamped.
Var clamp_min(const Var& x, double c);
// -(1 / rows) * sum_ik target_ik * x_ik; target is a constant.
Var neg_mean_rowdot(const Var& x, const Matrix& target);

// Fused LSTM step. gates: n x 4h pre-activations in [input, forget, cell,
// output] order. state: n x 2h holding [h | c] of the previous step (only c
// is read). Returns the new [h | c].
Var lstm_cell(const Var& gates, const Var& state);

}  // namespace prefplan::nn
