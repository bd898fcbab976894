// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>

#include "pairspec/errors.hpp"

namespace pairspec::autodiff {

namespace {

Tape& tape_of(Var a) {
  if (a.tape() == nullptr) throw Error("autodiff: variable is not attached to a tape");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape()) throw Error("autodiff: variables belong to different tapes");
  return tape_of(a);
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string("autodiff ") + op + ": shape mismatch " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

void require_scalar(const DenseMatrix& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1)
    throw DimensionError(std::string("autodiff ") + op + ": expected a 1x1 operand");
}

bool any_grad(Tape& t, std::initializer_list<Var> vs) {
  return std::any_of(vs.begin(), vs.end(), [&](Var v) { return t.needs_grad(v.id()); });
}

// Elementwise op whose derivative is a function of input and output.
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  Tape& t = tape_of(a);
  DenseMatrix out = a.value();
  for (double& x : out.data()) x = f(x);
  const std::size_t ia = a.id();
  return t.push(std::move(out), t.needs_grad(ia), [ia, dfdx](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    const DenseMatrix& x = tp.value(ia);
    const DenseMatrix& y = tp.value(self);
    DenseMatrix d(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) d.data()[i] = g.data()[i] * dfdx(x.data()[i], y.data()[i]);
    tp.accumulate(ia, d);
  });
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const DenseMatrix& Var::value() const {
  if (tape_ == nullptr) throw Error("autodiff: variable is not attached to a tape");
  return tape_->value(id_);
}

double Var::scalar() const {
  const DenseMatrix& v = value();
  require_scalar(v, "scalar");
  return v(0, 0);
}

Var Tape::constant(DenseMatrix value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(DenseMatrix value) { return push(std::move(value), true, nullptr); }

Var Tape::push(DenseMatrix value, bool needs_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), DenseMatrix{}, needs_grad, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

DenseMatrix& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = DenseMatrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const DenseMatrix& g) {
  if (!nodes_[id].needs_grad) return;
  grad_of(id) += g;
}

void Tape::backward(Var out) {
  if (out.tape() != this) throw Error("autodiff: backward target belongs to another tape");
  require_scalar(out.value(), "backward");
  for (Node& n : nodes_) n.grad = DenseMatrix{};
  if (!nodes_[out.id()].needs_grad) return;
  grad_of(out.id())(0, 0) = 1.0;
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

DenseMatrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) return DenseMatrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) throw DimensionError("autodiff matmul: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(numkit::matmul(a.value(), b.value()), any_grad(t, {a, b}),
                [ia, ib](Tape& tp, std::size_t self) {
                  const DenseMatrix& g = tp.grad_of(self);
                  if (tp.needs_grad(ia)) tp.accumulate(ia, numkit::matmul_nt(g, tp.value(ib)));
                  if (tp.needs_grad(ib)) tp.accumulate(ib, numkit::matmul_tn(tp.value(ia), g));
                });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.cols()) throw DimensionError("autodiff matmul_nt: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(numkit::matmul_nt(a.value(), b.value()), any_grad(t, {a, b}),
                [ia, ib](Tape& tp, std::size_t self) {
                  const DenseMatrix& g = tp.grad_of(self);
                  if (tp.needs_grad(ia)) tp.accumulate(ia, numkit::matmul(g, tp.value(ib)));
                  if (tp.needs_grad(ib)) tp.accumulate(ib, numkit::matmul_tn(g, tp.value(ia)));
                });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  return t.push(a.value().transpose(), t.needs_grad(ia), [ia](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad_of(self).transpose());
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), any_grad(t, {a, b}), [ia, ib](Tape& tp, std::size_t self) {
    const DenseMatrix g = tp.grad_of(self);
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), any_grad(t, {a, b}), [ia, ib](Tape& tp, std::size_t self) {
    const DenseMatrix g = tp.grad_of(self);
    tp.accumulate(ia, g);
    if (tp.needs_grad(ib)) tp.accumulate(ib, -1.0 * g);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "hadamard");
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(numkit::hadamard(a.value(), b.value()), any_grad(t, {a, b}),
                [ia, ib](Tape& tp, std::size_t self) {
                  const DenseMatrix& g = tp.grad_of(self);
                  if (tp.needs_grad(ia)) tp.accumulate(ia, numkit::hadamard(g, tp.value(ib)));
                  if (tp.needs_grad(ib)) tp.accumulate(ib, numkit::hadamard(g, tp.value(ia)));
                });
}

Var divide(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "divide");
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] /= b.value().data()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), any_grad(t, {a, b}), [ia, ib](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    const DenseMatrix& bv = tp.value(ib);
    const DenseMatrix& y = tp.value(self);
    DenseMatrix ga(g.rows(), g.cols()), gb(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data()[i] = g.data()[i] / bv.data()[i];
      gb.data()[i] = -g.data()[i] * y.data()[i] / bv.data()[i];
    }
    tp.accumulate(ia, ga);
    tp.accumulate(ib, gb);
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  return t.push(a.value() * s, t.needs_grad(ia), [ia, s](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad_of(self) * s);
  });
}

Var add_constant(Var a, double c) {
  Tape& t = tape_of(a);
  DenseMatrix out = a.value();
  for (double& x : out.data()) x += c;
  const std::size_t ia = a.id();
  return t.push(std::move(out), t.needs_grad(ia), [ia](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad_of(self));
  });
}

Var add_row(Var a, Var r) {
  Tape& t = tape_of(a, r);
  if (r.rows() != 1 || r.cols() != a.cols()) throw DimensionError("autodiff add_row: expected a 1 x cols row");
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r.value()(0, j);
  const std::size_t ia = a.id(), ir = r.id();
  return t.push(std::move(out), any_grad(t, {a, r}), [ia, ir](Tape& tp, std::size_t self) {
    const DenseMatrix g = tp.grad_of(self);
    tp.accumulate(ia, g);
    if (!tp.needs_grad(ir)) return;
    DenseMatrix gr(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
    tp.accumulate(ir, gr);
  });
}

Var add_col(Var a, Var c) {
  Tape& t = tape_of(a, c);
  if (c.cols() != 1 || c.rows() != a.rows()) throw DimensionError("autodiff add_col: expected a rows x 1 column");
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += c.value()(i, 0);
  const std::size_t ia = a.id(), ic = c.id();
  return t.push(std::move(out), any_grad(t, {a, c}), [ia, ic](Tape& tp, std::size_t self) {
    const DenseMatrix g = tp.grad_of(self);
    tp.accumulate(ia, g);
    if (!tp.needs_grad(ic)) return;
    DenseMatrix gc(g.rows(), 1);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gc(i, 0) += g(i, j);
    tp.accumulate(ic, gc);
  });
}

Var add_scalar(Var a, Var s) {
  Tape& t = tape_of(a, s);
  require_scalar(s.value(), "add_scalar");
  DenseMatrix out = a.value();
  const double sv = s.value()(0, 0);
  for (double& x : out.data()) x += sv;
  const std::size_t ia = a.id(), is = s.id();
  return t.push(std::move(out), any_grad(t, {a, s}), [ia, is](Tape& tp, std::size_t self) {
    const DenseMatrix g = tp.grad_of(self);
    tp.accumulate(ia, g);
    double total = 0.0;
    for (double x : g.data()) total += x;
    tp.accumulate(is, DenseMatrix(1, 1, total));
  });
}

Var mul_scalar(Var a, Var s) {
  Tape& t = tape_of(a, s);
  require_scalar(s.value(), "mul_scalar");
  const std::size_t ia = a.id(), is = s.id();
  return t.push(a.value() * s.value()(0, 0), any_grad(t, {a, s}), [ia, is](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    const double sv = tp.value(is)(0, 0);
    if (tp.needs_grad(ia)) tp.accumulate(ia, g * sv);
    if (tp.needs_grad(is)) {
      double total = 0.0;
      const DenseMatrix& av = tp.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) total += g.data()[i] * av.data()[i];
      tp.accumulate(is, DenseMatrix(1, 1, total));
    }
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary(a, stable_softplus, [](double x, double) { return sigmoid(x); });
}

Var silu(Var a) {
  return unary(
      a, [](double x) { return x * sigmoid(x); },
      [](double x, double) {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var row_normalize(Var a) {
  Tape& t = tape_of(a);
  DenseMatrix out = a.value();
  std::vector<double> norms(out.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    norms[i] = numkit::norm2(out.row_span(i));
    if (!(norms[i] > 0.0)) throw NumericError("autodiff row_normalize: zero row " + std::to_string(i));
    for (double& x : out.row_span(i)) x /= norms[i];
  }
  const std::size_t ia = a.id();
  return t.push(std::move(out), t.needs_grad(ia), [ia, norms](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    const DenseMatrix& y = tp.value(self);
    DenseMatrix d(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double gy = numkit::dot(g.row_span(i), y.row_span(i));
      for (std::size_t j = 0; j < g.cols(); ++j) d(i, j) = (g(i, j) - gy * y(i, j)) / norms[i];
    }
    tp.accumulate(ia, d);
  });
}

Var row_sqnorm(Var a) { return rowdot(a, a); }

Var row_sum(Var a) {
  Tape& t = tape_of(a);
  DenseMatrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double x : a.value().row_span(i)) out(i, 0) += x;
  const std::size_t ia = a.id();
  return t.push(std::move(out), t.needs_grad(ia), [ia](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    const DenseMatrix& av = tp.value(ia);
    DenseMatrix d(av.rows(), av.cols());
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) = g(i, 0);
    tp.accumulate(ia, d);
  });
}

Var rowdot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "rowdot");
  DenseMatrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) out(i, 0) = numkit::dot(a.value().row_span(i), b.value().row_span(i));
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), any_grad(t, {a, b}), [ia, ib](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    const DenseMatrix& av = tp.value(ia);
    const DenseMatrix& bv = tp.value(ib);
    DenseMatrix ga(av.rows(), av.cols()), gb(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) {
        ga(i, j) = g(i, 0) * bv(i, j);
        gb(i, j) = g(i, 0) * av(i, j);
      }
    // Both parents may be the same node (row_sqnorm); accumulation handles it.
    tp.accumulate(ia, ga);
    tp.accumulate(ib, gb);
  });
}

Var logsumexp_rows(Var a) {
  Tape& t = tape_of(a);
  const DenseMatrix& av = a.value();
  DenseMatrix out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    const auto row = av.row_span(i);
    const double m = *std::max_element(row.begin(), row.end());
    if (!std::isfinite(m)) {
      out(i, 0) = m;
      continue;
    }
    double s = 0.0;
    for (double x : row) s += std::exp(x - m);
    out(i, 0) = m + std::log(s);
  }
  const std::size_t ia = a.id();
  return t.push(std::move(out), t.needs_grad(ia), [ia](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    const DenseMatrix& av2 = tp.value(ia);
    const DenseMatrix& y = tp.value(self);
    DenseMatrix d(av2.rows(), av2.cols());
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) = g(i, 0) * std::exp(av2(i, j) - y(i, 0));
    tp.accumulate(ia, d);
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const std::size_t ia = a.id();
  return t.push(DenseMatrix(1, 1, s), t.needs_grad(ia), [ia](Tape& tp, std::size_t self) {
    const DenseMatrix& av = tp.value(ia);
    tp.accumulate(ia, DenseMatrix(av.rows(), av.cols(), tp.grad_of(self)(0, 0)));
  });
}

Var weighted_sum(Var a, const DenseMatrix& w) {
  Tape& t = tape_of(a);
  require_same_shape(a.value(), w, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w.data()[i] != 0.0) s += w.data()[i] * a.value().data()[i];
  const std::size_t ia = a.id();
  return t.push(DenseMatrix(1, 1, s), t.needs_grad(ia), [ia, w](Tape& tp, std::size_t self) {
    tp.accumulate(ia, w * tp.grad_of(self)(0, 0));
  });
}

Var mean(Var a) {
  if (a.value().empty()) throw DimensionError("autodiff mean: empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
  Tape& t = tape_of(a);
  const DenseMatrix& av = a.value();
  DenseMatrix out(rows.size(), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw DimensionError("autodiff gather_rows: row index out of range");
    std::copy_n(av.row_span(rows[i]).begin(), av.cols(), out.row_span(i).begin());
  }
  const std::size_t ia = a.id();
  return t.push(std::move(out), t.needs_grad(ia), [ia, rows](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    const DenseMatrix& av2 = tp.value(ia);
    DenseMatrix d(av2.rows(), av2.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j) d(rows[i], j) += g(i, j);
    tp.accumulate(ia, d);
  });
}

Var col_slice(Var a, std::size_t c0, std::size_t count) {
  Tape& t = tape_of(a);
  if (c0 + count > a.cols()) throw DimensionError("autodiff col_slice: columns out of range");
  const std::size_t ia = a.id();
  return t.push(a.value().block(0, c0, a.rows(), count), t.needs_grad(ia),
                [ia, c0, count](Tape& tp, std::size_t self) {
                  const DenseMatrix& g = tp.grad_of(self);
                  const DenseMatrix& av = tp.value(ia);
                  DenseMatrix d(av.rows(), av.cols());
                  for (std::size_t i = 0; i < d.rows(); ++i)
                    for (std::size_t j = 0; j < count; ++j) d(i, c0 + j) = g(i, j);
                  tp.accumulate(ia, d);
                });
}

Var hconcat(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows()) throw DimensionError("autodiff hconcat: row counts differ");
  const std::size_t ca = a.cols(), cb = b.cols();
  DenseMatrix out(a.rows(), ca + cb);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    std::copy_n(a.value().row_span(i).begin(), ca, out.row_span(i).begin());
    std::copy_n(b.value().row_span(i).begin(), cb, out.row_span(i).begin() + ca);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), any_grad(t, {a, b}), [ia, ib, ca, cb](Tape& tp, std::size_t self) {
    const DenseMatrix& g = tp.grad_of(self);
    if (tp.needs_grad(ia)) tp.accumulate(ia, g.block(0, 0, g.rows(), ca));
    if (tp.needs_grad(ib)) tp.accumulate(ib, g.block(0, ca, g.rows(), cb));
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& t = tape_of(a);
  if (rows * cols != a.value().size()) throw DimensionError("autodiff reshape: entry count differs");
  const std::size_t ia = a.id();
  return t.push(DenseMatrix(rows, cols, a.value().data()), t.needs_grad(ia), [ia](Tape& tp, std::size_t self) {
    const DenseMatrix& av = tp.value(ia);
    tp.accumulate(ia, DenseMatrix(av.rows(), av.cols(), tp.grad_of(self).data()));
  });
}

Var stop_gradient(Var a) { return tape_of(a).constant(a.value()); }

}  // namespace pairspec::autodiff
