#include "prefplan/nn/autodiff.hpp"

#include <cassert>
#include <cmath>

namespace prefplan::nn {

const Matrix& Var::value() const { return tape_->node(id_).value; }

Var Tape::constant(Matrix value) { return record(std::move(value), false, nullptr); }

Var Tape::leaf(Parameter& param) {
  Var v = record(param.value, true, nullptr);
  nodes_.back().param = &param;
  return v;
}

Var Tape::record(Matrix value, bool requires_grad, std::function<void(Tape&, Node&)> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = node(v.id());
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  assert(loss.rows() == 1 && loss.cols() == 1);
  accumulate(loss, Matrix::Ones(1, 1));
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n);
    if (n.param) {
      if (n.param->grad.size() == 0) n.param->grad = Matrix::Zero(n.value.rows(), n.value.cols());
      n.param->grad += n.grad;
    }
  }
}

namespace {

bool any_grad(std::initializer_list<Var> vs) {
  for (const auto& v : vs) {
    if (v.tape()->needs_grad(v)) return true;
  }
  return false;
}

// Eigen vectorizes exp for doubles but not tanh.
template <typename A>
Matrix sigmoid_of(const A& z) {
  return (1.0 + (-z).exp()).inverse().matrix();
}

template <typename A>
Matrix tanh_of(const A& z) {
  return (2.0 * (1.0 + (-2.0 * z).exp()).inverse() - 1.0).matrix();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  assert(a.cols() == b.rows());
  Tape& t = *a.tape();
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), any_grad({a, b}), [a, b](Tape& t, Tape::Node& self) {
    t.accumulate_product(a, self.grad, b.value().transpose());
    t.accumulate_product(b, a.value().transpose(), self.grad);
  });
}

Var add(const Var& a, const Var& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), any_grad({a, b}), [a, b](Tape& t, Tape::Node& self) {
    t.accumulate(a, self.grad);
    t.accumulate(b, self.grad);
  });
}

Var add_row(const Var& x, const Var& bias) {
  assert(bias.rows() == 1 && bias.cols() == x.cols());
  Tape& t = *x.tape();
  Matrix out = x.value().rowwise() + bias.value().row(0);
  return t.record(std::move(out), any_grad({x, bias}), [x, bias](Tape& t, Tape::Node& self) {
    t.accumulate(x, self.grad);
    if (t.needs_grad(bias)) t.accumulate(bias, self.grad.colwise().sum());
  });
}

Var mul(const Var& a, const Var& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  Tape& t = *a.tape();
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), any_grad({a, b}), [a, b](Tape& t, Tape::Node& self) {
    if (t.needs_grad(a)) t.accumulate(a, self.grad.cwiseProduct(b.value()));
    if (t.needs_grad(b)) t.accumulate(b, self.grad.cwiseProduct(a.value()));
  });
}

Var scale(const Var& x, double c) {
  Tape& t = *x.tape();
  return t.record(x.value() * c, any_grad({x}),
                  [x, c](Tape& t, Tape::Node& self) { t.accumulate(x, self.grad * c); });
}

Var add_scalar(const Var& x, double c) {
  Tape& t = *x.tape();
  Matrix out = x.value().array() + c;
  return t.record(std::move(out), any_grad({x}), [x](Tape& t, Tape::Node& self) { t.accumulate(x, self.grad); });
}

Var tanh(const Var& x) {
  Tape& t = *x.tape();
  Matrix out = tanh_of(x.value().array());
  return t.record(out, any_grad({x}), [x, out](Tape& t, Tape::Node& self) {
    t.accumulate(x, self.grad.array() * (1.0 - out.array().square()));
  });
}

Var exp(const Var& x) {
  Tape& t = *x.tape();
  Matrix out = x.value().array().exp();
  return t.record(out, any_grad({x}),
                  [x, out](Tape& t, Tape::Node& self) { t.accumulate(x, self.grad.cwiseProduct(out)); });
}

Var sum(const Var& x) {
  Tape& t = *x.tape();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return t.record(std::move(out), any_grad({x}), [x](Tape& t, Tape::Node& self) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), self.grad(0, 0)));
  });
}

Var gather_rows(const Var& table, std::vector<int> ids) {
  Tape& t = *table.tape();
  const Matrix& v = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), v.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    assert(ids[r] >= 0 && ids[r] < v.rows());
    out.row(static_cast<Eigen::Index>(r)) = v.row(ids[r]);
  }
  return t.record(std::move(out), any_grad({table}), [table, ids = std::move(ids)](Tape& t, Tape::Node& self) {
    Matrix g = Matrix::Zero(table.rows(), table.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) g.row(ids[r]) += self.grad.row(static_cast<Eigen::Index>(r));
    t.accumulate(table, g);
  });
}

Var slice_rows(const Var& x, Eigen::Index r0, Eigen::Index n) {
  assert(r0 >= 0 && r0 + n <= x.rows());
  Tape& t = *x.tape();
  Matrix out = x.value().middleRows(r0, n);
  return t.record(std::move(out), any_grad({x}),
                  [x, r0](Tape& t, Tape::Node& self) { t.accumulate_block(x, r0, 0, self.grad); });
}

Var slice_cols(const Var& x, Eigen::Index c0, Eigen::Index n) {
  assert(c0 >= 0 && c0 + n <= x.cols());
  Tape& t = *x.tape();
  Matrix out = x.value().middleCols(c0, n);
  return t.record(std::move(out), any_grad({x}),
                  [x, c0](Tape& t, Tape::Node& self) { t.accumulate_block(x, 0, c0, self.grad); });
}

Var concat_rows(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Tape& t = *parts[0].tape();
  Eigen::Index rows = 0;
  bool grad = false;
  for (const auto& p : parts) {
    assert(p.cols() == parts[0].cols());
    rows += p.rows();
    grad = grad || t.needs_grad(p);
  }
  Matrix out(rows, parts[0].cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.record(std::move(out), grad, [parts](Tape& t, Tape::Node& self) {
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      t.accumulate_block(p, 0, 0, self.grad.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Tape& t = *parts[0].tape();
  Eigen::Index cols = 0;
  bool grad = false;
  for (const auto& p : parts) {
    assert(p.rows() == parts[0].rows());
    cols += p.cols();
    grad = grad || t.needs_grad(p);
  }
  Matrix out(parts[0].rows(), cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.record(std::move(out), grad, [parts](Tape& t, Tape::Node& self) {
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      t.accumulate_block(p, 0, 0, self.grad.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var segment_mean(const Var& x, std::vector<int> offsets) {
  assert(offsets.size() >= 2 && offsets.back() == x.rows());
  Tape& t = *x.tape();
  const auto groups = static_cast<Eigen::Index>(offsets.size() - 1);
  Matrix out(groups, x.cols());
  for (Eigen::Index k = 0; k < groups; ++k) {
    const int n = offsets[k + 1] - offsets[k];
    assert(n > 0);
    out.row(k) = x.value().middleRows(offsets[k], n).colwise().sum() / static_cast<double>(n);
  }
  return t.record(std::move(out), any_grad({x}), [x, offsets = std::move(offsets)](Tape& t, Tape::Node& self) {
    Matrix g(x.rows(), x.cols());
    for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
      const int n = offsets[k + 1] - offsets[k];
      for (int r = offsets[k]; r < offsets[k + 1]; ++r) g.row(r) = self.grad.row(static_cast<Eigen::Index>(k)) / n;
    }
    t.accumulate(x, g);
  });
}

Var log_softmax(const Var& x) {
  Tape& t = *x.tape();
  Matrix out = x.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    const double lse = m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  return t.record(out, any_grad({x}), [x, out](Tape& t, Tape::Node& self) {
    // dx = g - softmax * rowsum(g)
    Matrix g = self.grad;
    const Eigen::VectorXd s = self.grad.rowwise().sum();
    for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r).array() -= out.row(r).array().exp() * s(r);
    t.accumulate(x, g);
  });
}

Var softmax(const Var& x) {
  Tape& t = *x.tape();
  Matrix out = x.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r).array() = (out.row(r).array() - out.row(r).maxCoeff()).exp();
    out.row(r) /= out.row(r).sum();
  }
  return t.record(out, any_grad({x}), [x, out](Tape& t, Tape::Node& self) {
    Matrix g = out.cwiseProduct(self.grad);
    const Eigen::VectorXd s = g.rowwise().sum();
    for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r) -= out.row(r) * s(r);
    t.accumulate(x, g);
  });
}

Var clamp_min(const Var& x, double c) {
  Tape& t = *x.tape();
  Matrix out = x.value().cwiseMax(c);
  return t.record(std::move(out), any_grad({x}), [x, c](Tape& t, Tape::Node& self) {
    t.accumulate(x, (x.value().array() > c).select(self.grad, 0.0));
  });
}

Var neg_mean_rowdot(const Var& x, const Matrix& target) {
  assert(x.rows() == target.rows() && x.cols() == target.cols());
  Tape& t = *x.tape();
  const double k = -1.0 / static_cast<double>(x.rows());
  Matrix out(1, 1);
  out(0, 0) = k * x.value().cwiseProduct(target).sum();
  return t.record(std::move(out), any_grad({x}), [x, target, k](Tape& t, Tape::Node& self) {
    t.accumulate(x, target * (k * self.grad(0, 0)));
  });
}

Var lstm_cell(const Var& gates, const Var& state) {
  const Eigen::Index n = gates.rows();
  const Eigen::Index h = gates.cols() / 4;
  assert(state.rows() == n && state.cols() == 2 * h);
  Tape& t = *gates.tape();
  const Matrix& G = gates.value();
  Matrix i = sigmoid_of(G.middleCols(0, h).array());
  Matrix f = sigmoid_of(G.middleCols(h, h).array());
  Matrix g = tanh_of(G.middleCols(2 * h, h).array());
  Matrix o = sigmoid_of(G.middleCols(3 * h, h).array());
  Matrix c_prev = state.value().middleCols(h, h);
  Matrix c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  Matrix tc = tanh_of(c.array());
  Matrix out(n, 2 * h);
  out.leftCols(h) = o.cwiseProduct(tc);
  out.rightCols(h) = c;
  return t.record(std::move(out), any_grad({gates, state}),
                  [gates, state, h, i, f, g, o, c_prev, tc](Tape& t, Tape::Node& self) {
                    const auto dh = self.grad.leftCols(h).array();
                    const Eigen::ArrayXXd dc =
                        self.grad.rightCols(h).array() + dh * o.array() * (1.0 - tc.array().square());
                    if (t.needs_grad(gates)) {
                      Matrix dg(gates.rows(), 4 * h);
                      dg.middleCols(0, h) = (dc * g.array() * i.array() * (1.0 - i.array())).matrix();
                      dg.middleCols(h, h) = (dc * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
                      dg.middleCols(2 * h, h) = (dc * i.array() * (1.0 - g.array().square())).matrix();
                      dg.middleCols(3 * h, h) = (dh * tc.array() * o.array() * (1.0 - o.array())).matrix();
                      t.accumulate(gates, dg);
                    }
                    if (t.needs_grad(state)) {
                      t.accumulate_block(state, 0, h, (dc * f.array()).matrix());
                    }
                  });
}

}  // namespace prefplan::nn
