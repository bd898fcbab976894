// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "pairspec/numkit/dense_matrix.hpp"

namespace pairspec::autodiff {

using numkit::DenseMatrix;

class Tape;

/// Handle to a matrix-valued node on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Scalar value of a 1x1 node.
  double scalar() const;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order, so a single reverse sweep visits every node after its consumers.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseMatrix value);
  /// A leaf whose gradient is retained after backward().
  Var variable(DenseMatrix value);

  /// Seeds d(out)/d(out) = 1 for a 1x1 node and sweeps backwards.
  void backward(Var out);
  /// Gradient of the last backward() target w.r.t. `v` (zeros when unreached).
  DenseMatrix grad(Var v) const;

  const DenseMatrix& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  using Backward = std::function<void(Tape&, std::size_t self)>;
  /// Appends an op node; `backward` reads grad_of(self) and accumulates into parents.
  Var push(DenseMatrix value, bool needs_grad, Backward backward);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  DenseMatrix& grad_of(std::size_t id);
  /// Adds `g` into the gradient buffer of `id` when that node needs one.
  void accumulate(std::size_t id, const DenseMatrix& g);

 private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    bool needs_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Shape conventions: vectors are column matrices, scalars are 1x1.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
/// Elementwise a / b.
Var divide(Var a, Var b);
Var scale(Var a, double s);
Var add_constant(Var a, double c);
/// a (n x m) + r (1 x m) broadcast over rows.
Var add_row(Var a, Var r);
/// a (n x m) + c (n x 1) broadcast over columns.
Var add_col(Var a, Var c);
/// a + s for a 1x1 node s.
Var add_scalar(Var a, Var s);
/// a * s for a 1x1 node s.
Var mul_scalar(Var a, Var s);

Var tanh(Var a);
Var exp(Var a);
/// Natural log; the caller guarantees positive inputs.
Var log(Var a);
Var softplus(Var a);
Var silu(Var a);
Var square(Var a);

/// Each row divided by its Euclidean norm.
Var row_normalize(Var a);
/// n x 1 column of squared row norms.
Var row_sqnorm(Var a);
/// n x 1 column of row sums.
Var row_sum(Var a);
/// n x 1 column of sum_j a_ij b_ij.
Var rowdot(Var a, Var b);
/// n x 1 column of log sum_j exp(a_ij).
Var logsumexp_rows(Var a);
/// 1x1 sum of all entries.
Var sum(Var a);
/// 1x1 sum of w_ij a_ij for a constant weight matrix; zero weights skip their entry.
Var weighted_sum(Var a, const DenseMatrix& w);
/// 1x1 mean of all entries.
Var mean(Var a);

Var gather_rows(Var a, const std::vector<std::size_t>& rows);
Var col_slice(Var a, std::size_t c0, std::size_t count);
/// [a | b] for equal row counts.
Var hconcat(Var a, Var b);
/// Row-major reinterpretation with the same entry count.
Var reshape(Var a, std::size_t rows, std::size_t cols);
/// Same value, no gradient flows through.
Var stop_gradient(Var a);

}  // namespace pairspec::autodiff
