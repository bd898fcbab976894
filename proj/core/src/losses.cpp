// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/contrastive/losses.hpp"

#include <cmath>
#include <limits>

#include "pairspec/errors.hpp"

namespace pairspec::contrastive {

namespace ad = autodiff;

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void require_nonnegative(const DenseMatrix& k, const char* loss) {
  for (double x : k.data())
    if (x < 0.0 || std::isnan(x))
      throw DomainError(std::string(loss) + " loss needs a positive kernel; use the spectral loss for linear heads");
}

void require_shape(const DenseMatrix& k, const PosPairOperator& op) {
  if (k.rows() != op.view_count() || k.cols() != op.view_count())
    throw DimensionError("population loss: kernel matrix must be |A| x |A|");
}

// log K for heads without a closed-form log; nonpositive entries are a domain error.
Var checked_log(const KernelTerms& k, const char* loss) {
  if (k.log_value) return *k.log_value;
  for (double x : k.value.value().data())
    if (!(x > 0.0))
      throw DomainError(std::string(loss) + " loss needs a positive kernel (got " + std::to_string(x) +
                        "); use the spectral loss for linear heads");
  return ad::log(k.value);
}

}  // namespace

void LossSpec::validate() const {
  for (double w : {xent, logistic, spectral})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and nonnegative");
  if (!(xent > 0.0 || logistic > 0.0 || spectral > 0.0)) throw ConfigError("loss: at least one weight must be positive");
  if (!population && negatives == 0) throw ConfigError("loss: negatives per positive must be at least 1");
  if (!(bias_reg >= 0.0)) throw ConfigError("loss: bias regularization must be nonnegative");
}

LossSpec LossSpec::mixture() {
  LossSpec s;
  s.xent = 0.9;
  s.logistic = 0.1;
  s.spectral = 0.0;
  return s;
}

double population_xent(const DenseMatrix& k_hat, const PosPairOperator& op) {
  require_shape(k_hat, op);
  require_nonnegative(k_hat, "xent");
  const auto& p = op.p_a();
  const auto& joint = op.joint();
  double loss = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    double norm = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) norm += p[b] * k_hat(a, b);
    for (std::size_t b = 0; b < p.size(); ++b) {
      if (joint(a, b) == 0.0) continue;
      const double q = p[b] * k_hat(a, b) / norm;
      loss -= joint(a, b) * (q > 0.0 ? std::log(q) : -std::numeric_limits<double>::infinity());
    }
  }
  return loss;
}

double population_logistic(const DenseMatrix& k_hat, const PosPairOperator& op) {
  require_shape(k_hat, op);
  require_nonnegative(k_hat, "logistic");
  const auto& p = op.p_a();
  const auto& joint = op.joint();
  double loss = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < p.size(); ++b) {
      const double lk = std::log(k_hat(a, b));
      if (joint(a, b) != 0.0) loss += joint(a, b) * softplus(-lk);
      loss += p[a] * p[b] * softplus(lk);
    }
  return loss;
}

double population_spectral(const DenseMatrix& k_hat, const PosPairOperator& op) {
  require_shape(k_hat, op);
  const auto& p = op.p_a();
  const auto& joint = op.joint();
  double loss = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < p.size(); ++b)
      loss += -2.0 * joint(a, b) * k_hat(a, b) + p[a] * p[b] * k_hat(a, b) * k_hat(a, b);
  return loss;
}

Objective::Objective(FiniteTask task, InputEncoder encoder, LossSpec spec)
    : task_(std::move(task)), encoder_(std::move(encoder)), spec_(spec) {
  spec_.validate();
  if (!spec_.population) return;
  if (!task_.is_enumerated()) throw ConfigError("population losses need an enumerated task");
  op_ = PosPairOperator::build_exact(task_);
  all_inputs_ = encoder_.encode_all();
  const auto& p = op_->p_a();
  product_ = DenseMatrix(p.size(), p.size());
  log_p_row_ = DenseMatrix(1, p.size());
  for (std::size_t a = 0; a < p.size(); ++a) {
    log_p_row_(0, a) = std::log(p[a]);
    for (std::size_t b = 0; b < p.size(); ++b) product_(a, b) = p[a] * p[b];
  }
}

Batch Objective::sample(std::size_t pairs, Rng& rng) const {
  Batch b;
  if (spec_.population) return b;
  b.positives.reserve(pairs);
  for (std::size_t i = 0; i < pairs; ++i) b.positives.push_back(tasklab::sample_pair(task_, rng));
  b.negatives.reserve(pairs * spec_.negatives);
  for (std::size_t i = 0; i < pairs * spec_.negatives; ++i) b.negatives.push_back(tasklab::sample_marginal_view(task_, rng));
  return b;
}

Var Objective::encode(Tape& tape, const std::vector<ViewSample>& views) const {
  return tape.constant(encoder_.encode(views));
}

LossValue Objective::population(const ParamKernel& model, Tape& tape, std::span<const Var> params, Var& total) const {
  const Embedding e = model.embed(params, tape.constant(all_inputs_));
  const KernelTerms k = model.gram_kernel(params, e, e);
  const DenseMatrix& joint = op_->joint();
  LossValue out;
  std::vector<Var> terms;
  if (spec_.spectral > 0.0) {
    const Var v = ad::add(ad::scale(ad::weighted_sum(k.value, joint), -2.0),
                          ad::weighted_sum(ad::square(k.value), product_));
    out.spectral = v.scalar();
    terms.push_back(ad::scale(v, spec_.spectral));
  }
  if (spec_.xent > 0.0 || spec_.logistic > 0.0) {
    const Var logk = checked_log(k, spec_.xent > 0.0 ? "xent" : "logistic");
    if (spec_.xent > 0.0) {
      const Var shifted = ad::add_row(logk, tape.constant(log_p_row_));
      const Var lse = ad::logsumexp_rows(shifted);
      const Var v = ad::sub(ad::weighted_sum(lse, DenseMatrix::column(op_->p_a())), ad::weighted_sum(shifted, joint));
      out.xent = v.scalar();
      terms.push_back(ad::scale(v, spec_.xent));
    }
    if (spec_.logistic > 0.0) {
      const Var v = ad::add(ad::weighted_sum(ad::softplus(ad::scale(logk, -1.0)), joint),
                            ad::weighted_sum(ad::softplus(logk), product_));
      out.logistic = v.scalar();
      terms.push_back(ad::scale(v, spec_.logistic));
    }
  }
  total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return out;
}

LossValue Objective::sampled(const ParamKernel& model, const Batch& batch, Tape& tape, std::span<const Var> params,
                             Var& total) const {
  const std::size_t n = batch.positives.size();
  const std::size_t neg = batch.negatives_per_pair();
  if (n == 0 || neg == 0 || batch.negatives.size() != n * neg)
    throw DimensionError("batch: need at least one positive pair and a whole number of negatives per pair");
  std::vector<ViewSample> first, second;
  first.reserve(n);
  second.reserve(n);
  for (const PosPair& pp : batch.positives) {
    first.push_back(pp.first);
    second.push_back(pp.second);
  }
  const Embedding e1 = model.embed(params, encode(tape, first));
  const Embedding e2 = model.embed(params, encode(tape, second));
  const Embedding en = model.embed(params, encode(tape, batch.negatives));

  std::vector<std::size_t> repeat(n * neg);
  for (std::size_t i = 0; i < repeat.size(); ++i) repeat[i] = i / neg;
  auto gather = [&](const Embedding& e) {
    Embedding g{ad::gather_rows(e.h, repeat), std::nullopt};
    if (e.log_scale) g.log_scale = ad::gather_rows(*e.log_scale, repeat);
    return g;
  };
  const KernelTerms pos = model.pair_kernel(params, e1, e2);
  const KernelTerms neg1 = model.pair_kernel(params, gather(e1), en);
  const KernelTerms neg2 = model.pair_kernel(params, gather(e2), en);

  LossValue out;
  std::vector<Var> terms;
  if (spec_.spectral > 0.0) {
    const Var negsq = ad::scale(ad::add(ad::mean(ad::square(neg1.value)), ad::mean(ad::square(neg2.value))), 0.5);
    const Var v = ad::add(ad::scale(ad::mean(pos.value), -2.0), negsq);
    out.spectral = v.scalar();
    terms.push_back(ad::scale(v, spec_.spectral));
  }
  if (spec_.xent > 0.0 || spec_.logistic > 0.0) {
    const char* name = spec_.xent > 0.0 ? "xent" : "logistic";
    const Var lpos = checked_log(pos, name);
    const Var l1 = checked_log(neg1, name);
    const Var l2 = checked_log(neg2, name);
    if (spec_.xent > 0.0) {
      auto ordering = [&](Var lneg) {
        const Var logits = ad::hconcat(lpos, ad::reshape(lneg, n, neg));
        return ad::mean(ad::sub(ad::logsumexp_rows(logits), lpos));
      };
      const Var v = ad::scale(ad::add(ordering(l1), ordering(l2)), 0.5);
      out.xent = v.scalar();
      terms.push_back(ad::scale(v, spec_.xent));
    }
    if (spec_.logistic > 0.0) {
      const Var negterm = ad::scale(ad::add(ad::mean(ad::softplus(l1)), ad::mean(ad::softplus(l2))), 0.5);
      const Var v = ad::add(ad::mean(ad::softplus(ad::scale(lpos, -1.0))), negterm);
      out.logistic = v.scalar();
      terms.push_back(ad::scale(v, spec_.logistic));
    }
  }
  total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return out;
}

LossValue Objective::evaluate(const ParamKernel& model, const Batch& batch, std::vector<DenseMatrix>* grads) const {
  if (model.input_dim() != encoder_.dim()) throw DimensionError("objective: model input width differs from the encoder");
  Tape tape;
  const auto params = model.attach(tape, grads != nullptr);
  Var total;
  LossValue out = spec_.population ? population(model, tape, params, total) : sampled(model, batch, tape, params, total);
  if (spec_.bias_reg > 0.0)
    if (const auto pen = model.bias_penalty(params)) total = ad::add(total, ad::scale(*pen, spec_.bias_reg));
  out.total = total.scalar();
  if (grads) {
    tape.backward(total);
    grads->clear();
    for (const Var& p : params) grads->push_back(tape.grad(p));
  }
  return out;
}

}  // namespace pairspec::contrastive
