// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pairspec/contrastive/losses.hpp"

namespace pairspec::contrastive {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t steps = 2000;
  /// Positive pairs per step.
  std::size_t batch = 256;
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate(const LossSpec& loss) const;
};

/// Adam with a cosine learning-rate decay from lr to 0 over `total_steps`.
class Adam {
 public:
  Adam(const std::vector<DenseMatrix>& params, AdamConfig cfg, std::size_t total_steps);
  void step(std::vector<DenseMatrix>& params, const std::vector<DenseMatrix>& grads);
  double learning_rate() const;
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t total_;
  std::size_t t_ = 0;
  std::vector<DenseMatrix> m_, v_;
};

struct CurvePoint {
  std::size_t step = 0;
  LossValue loss;
};

struct TrainResult {
  ParamKernel model;
  std::vector<CurvePoint> curve;
};

/// Deterministic given cfg.seed. Throws NumericError naming the step and
/// parameter norm when the loss or a gradient becomes non-finite.
TrainResult train(const Objective& objective, ParamKernel init, const TrainConfig& cfg);

/// Central differences with one Richardson step, compared against reverse mode.
/// Returns max over trainable entries of |g_ad - g_fd| / max(|g_ad|, 1e-6).
double grad_check(const ParamKernel& model, const Objective& objective, const Batch& batch, double h = 1e-4);

/// Generic form: `loss` evaluates a flat parameter vector, `grad` its reverse-mode gradient.
double grad_check(const std::function<double(const Vector&)>& loss, const Vector& x, const Vector& grad,
                  double h = 1e-4);

/// One JSON header line describing the architecture, then the float64 tensors in order.
void save_checkpoint(std::ostream& out, const ParamKernel& model);
ParamKernel load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ParamKernel& model);
ParamKernel load_checkpoint(const std::string& path);

/// CSV with columns step,loss,xent,logistic,spectral.
void write_loss_curve(std::ostream& out, const std::vector<CurvePoint>& curve);

/// Flattening helpers over a tensor list.
Vector flatten(const std::vector<DenseMatrix>& tensors);
void unflatten(const Vector& flat, std::vector<DenseMatrix>& tensors);

}  // namespace pairspec::contrastive
