// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pairspec/contrastive/train.hpp"
#include "pairspec/spectra/spectra.hpp"

namespace pairspec::neuralef {

using contrastive::InputEncoder;
using contrastive::Mlp;
using contrastive::MlpSpec;
using contrastive::TrainConfig;
using numkit::DenseMatrix;
using numkit::Rng;
using numkit::Vector;
using tasklab::FiniteTask;
using tasklab::PosPair;
using tasklab::ViewSample;

/// Encoder with one output per candidate eigenfunction.
class NefModel {
 public:
  NefModel(std::size_t input_dim, MlpSpec spec, std::size_t count, Rng& rng);
  NefModel(std::size_t input_dim, MlpSpec spec, std::size_t count, std::vector<DenseMatrix> params);

  const Mlp& encoder() const noexcept { return mlp_; }
  std::size_t count() const noexcept { return mlp_.output_dim(); }
  std::size_t input_dim() const noexcept { return mlp_.input_dim(); }
  const std::vector<DenseMatrix>& params() const noexcept { return params_; }
  std::vector<DenseMatrix>& params() noexcept { return params_; }
  std::vector<std::string> param_names() const;
  double param_norm() const;
  /// Raw outputs, one column per function.
  DenseMatrix outputs(const DenseMatrix& inputs) const;

 private:
  Mlp mlp_;
  std::vector<DenseMatrix> params_;
};

struct NefBatch {
  std::vector<PosPair> positives;
  std::vector<ViewSample> marginals;
};

struct NefLossValue {
  double loss = 0.0;
  /// In-batch R^mix estimate.
  DenseMatrix r;
  /// Functions whose R^mix_ii fell below 1e-6.
  std::vector<std::size_t> ill_conditioned;
};

/// Objective from precomputed function values: rows are samples, columns functions.
/// Every column is rescaled to unit mean square over `marginal` first, then
/// R^mix = (1 - w) E_{p+}[f_i(a1) f_j(a2)] + w E_p[f_i f_j] (pair term symmetrized)
/// and loss = sum_j (-R_jj + sum_{i<j} R_ij^2 / R_ii).
NefLossValue nef_loss(const DenseMatrix& first, const DenseMatrix& second, const DenseMatrix& marginal,
                      double mix = 0.5);

struct NefConfig {
  std::size_t count = 3;
  MlpSpec encoder{{64, 64}, contrastive::Activation::silu};
  double mix = 0.5;
  double ema = 0.99;
  /// Exact expectations over every view instead of sampled batches (enumerated tasks).
  bool population = false;
  /// Marginal draws used to normalize the returned functions in sampled mode.
  std::size_t holdout = 8192;
  TrainConfig train;

  void validate() const;
};

/// Binds the NeuralEF objective to a task; mirrors contrastive::Objective.
class NefObjective {
 public:
  NefObjective(FiniteTask task, InputEncoder encoder, double mix, bool population);

  const FiniteTask& task() const noexcept { return task_; }
  const InputEncoder& encoder() const noexcept { return encoder_; }
  NefBatch sample(std::size_t pairs, Rng& rng) const;
  /// Loss and in-batch R^mix; fills `grads` (d loss / d param) when given.
  NefLossValue evaluate(const NefModel& model, const NefBatch& batch, std::vector<DenseMatrix>* grads = nullptr) const;

 private:
  FiniteTask task_;
  InputEncoder encoder_;
  double mix_;
  bool population_;
  std::optional<pospair::PosPairOperator> op_;
  DenseMatrix all_inputs_;
};

struct NefCurvePoint {
  std::size_t step = 0;
  double loss = 0.0;
};

struct NefResult {
  NefModel model;
  /// lambda_i = (R_ii - w) / (1 - w) from the running R^mix average.
  Vector eigenvalues;
  DenseMatrix r_running;
  /// Output column scales that give unit E_p[f^2].
  Vector scales;
  /// Normalized functions on every view; empty for multiset tasks.
  spectra::EigenBasis basis;
  std::vector<NefCurvePoint> curve;
  std::size_t ill_conditioned_steps = 0;

  /// Normalized function values on arbitrary views.
  DenseMatrix functions(const InputEncoder& encoder, const std::vector<ViewSample>& views) const;
};

NefResult nef_train(const FiniteTask& task, const InputEncoder& encoder, const NefConfig& cfg);

void save_checkpoint(std::ostream& out, const NefModel& model);
NefModel load_nef_checkpoint(std::istream& in);

}  // namespace pairspec::neuralef
