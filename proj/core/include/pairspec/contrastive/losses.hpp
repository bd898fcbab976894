// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pairspec/contrastive/model.hpp"
#include "pairspec/pospair/operator.hpp"

namespace pairspec::contrastive {

using pospair::PosPairOperator;
using tasklab::PosPair;

struct LossSpec {
  double xent = 0.0;
  double logistic = 0.0;
  double spectral = 1.0;
  /// Fresh marginal negatives drawn per positive pair.
  std::size_t negatives = 16;
  /// Full-batch analytic losses over every view pair (enumerated tasks only).
  bool population = false;
  /// Weight on b^2 for the global-bias hypersphere head.
  double bias_reg = 1e-3;

  void validate() const;
  /// 0.9 xent + 0.1 logistic.
  static LossSpec mixture();
};

struct LossValue {
  double total = 0.0;
  double xent = 0.0;
  double logistic = 0.0;
  double spectral = 0.0;
};

// Population losses of an explicit kernel matrix under the pair law of `op`.
// Zero-weight terms contribute nothing, so K_hat may vanish off the support.

/// -sum p+(a1,a2) log(p(a2) K(a1,a2) / sum_a p(a) K(a1,a)). Throws DomainError on negative K.
double population_xent(const DenseMatrix& k_hat, const PosPairOperator& op);
/// sum p+ softplus(-log K) + sum p p^T softplus(log K). Throws DomainError on negative K.
double population_logistic(const DenseMatrix& k_hat, const PosPairOperator& op);
/// -2 sum p+ K + sum p p^T K^2.
double population_spectral(const DenseMatrix& k_hat, const PosPairOperator& op);

/// Positive pairs plus `negatives.size() / positives.size()` marginal draws per pair, row-major.
struct Batch {
  std::vector<PosPair> positives;
  std::vector<ViewSample> negatives;
  std::size_t negatives_per_pair() const {
    return positives.empty() ? 0 : negatives.size() / positives.size();
  }
};

/// A loss mixture bound to a task and an input encoding.
class Objective {
 public:
  Objective(FiniteTask task, InputEncoder encoder, LossSpec spec);

  const FiniteTask& task() const noexcept { return task_; }
  const InputEncoder& encoder() const noexcept { return encoder_; }
  const LossSpec& spec() const noexcept { return spec_; }
  /// Exact pair law; present in population mode.
  const PosPairOperator* pair_law() const noexcept { return op_ ? &*op_ : nullptr; }

  Batch sample(std::size_t pairs, Rng& rng) const;
  /// Loss of `model` on `batch` (ignored in population mode). When `grads` is
  /// given it receives d total / d param for every tensor, zeros for frozen ones.
  LossValue evaluate(const ParamKernel& model, const Batch& batch, std::vector<DenseMatrix>* grads = nullptr) const;

 private:
  LossValue population(const ParamKernel& model, Tape& tape, std::span<const Var> params, Var& total) const;
  LossValue sampled(const ParamKernel& model, const Batch& batch, Tape& tape, std::span<const Var> params,
                    Var& total) const;
  Var encode(Tape& tape, const std::vector<ViewSample>& views) const;

  FiniteTask task_;
  InputEncoder encoder_;
  LossSpec spec_;
  std::optional<PosPairOperator> op_;
  DenseMatrix all_inputs_;
  DenseMatrix product_;  // p p^T
  DenseMatrix log_p_row_;
};

}  // namespace pairspec::contrastive
