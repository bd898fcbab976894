// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/pospair/operator.hpp"

#include <cmath>
#include <string>

#include "pairspec/errors.hpp"

namespace pairspec::pospair {

PosPairOperator PosPairOperator::build_exact(const FiniteTask& task) {
  if (!task.is_enumerated()) throw DimensionError("build_exact: task has multiset views");
  PosPairOperator op;
  op.p_z_ = task.p_z();
  op.cond_ = task.cond();
  const std::size_t nz = op.p_z_.size();
  const std::size_t na = op.cond_.cols();

  op.p_a_.assign(na, 0.0);
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t a = 0; a < na; ++a) op.p_a_[a] += op.p_z_[z] * op.cond_(z, a);
  for (std::size_t a = 0; a < na; ++a) {
    if (!(op.p_a_[a] >= tasklab::kUnreachableMarginal)) {
      throw CoverageError("build_exact: view " + std::to_string(a) + " has zero marginal");
    }
  }

  // Symmetric by construction: each entry is the same sum in either order.
  op.joint_ = DenseMatrix(na, na);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = i; j < na; ++j) {
      double s = 0.0;
      for (std::size_t z = 0; z < nz; ++z) s += op.cond_(z, i) * op.cond_(z, j) * op.p_z_[z];
      op.joint_(i, j) = op.joint_(j, i) = s;
    }
  }
  return op;
}

DenseMatrix PosPairOperator::kernel() const {
  Vector inv(p_a_.size());
  for (std::size_t a = 0; a < inv.size(); ++a) inv[a] = 1.0 / p_a_[a];
  return numkit::scale_rows_cols(joint_, inv, inv);
}

DenseMatrix PosPairOperator::feature_matrix() const {
  Vector left(p_z_.size()), right(p_a_.size());
  for (std::size_t z = 0; z < left.size(); ++z) left[z] = std::sqrt(p_z_[z]);
  for (std::size_t a = 0; a < right.size(); ++a) right[a] = 1.0 / p_a_[a];
  return numkit::scale_rows_cols(cond_, left, right);
}

DenseMatrix PosPairOperator::transition() const {
  Vector ones(p_a_.size(), 1.0), inv(p_a_.size());
  for (std::size_t a = 0; a < inv.size(); ++a) inv[a] = 1.0 / p_a_[a];
  return numkit::scale_rows_cols(joint_, ones, inv);
}

DenseMatrix PosPairOperator::symmetric() const {
  Vector s(p_a_.size());
  for (std::size_t a = 0; a < s.size(); ++a) s[a] = 1.0 / std::sqrt(p_a_[a]);
  return numkit::scale_rows_cols(joint_, s, s);
}

DenseMatrix PosPairOperator::laplacian() const {
  DenseMatrix l = joint_ * -1.0;
  for (std::size_t a = 0; a < p_a_.size(); ++a) l(a, a) += p_a_[a];
  return l;
}

Vector PosPairOperator::transition_row(std::size_t a) const {
  if (a >= p_a_.size()) throw DimensionError("transition_row: view index out of range");
  Vector row(p_a_.size());
  for (std::size_t b = 0; b < row.size(); ++b) row[b] = joint_(b, a) / p_a_[a];
  return row;
}

const KernelEvaluator::Entry& KernelEvaluator::lookup(const ViewSample& a) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(a); it != cache_.end()) return it->second;
  }
  Entry e{tasklab::latent_posterior(task_, a), tasklab::marginal_prob(task_, a)};
  std::lock_guard lock(mutex_);
  // std::map never relocates nodes, so the returned reference stays valid.
  return cache_.try_emplace(a, std::move(e)).first->second;
}

double KernelEvaluator::operator()(const ViewSample& a1, const ViewSample& a2) const {
  const Vector& q1 = lookup(a1).posterior;
  const Vector& q2 = lookup(a2).posterior;
  const Vector& pz = task_.p_z();
  double s = 0.0;
  for (std::size_t z = 0; z < pz.size(); ++z)
    if (pz[z] > 0.0) s += q1[z] * q2[z] / pz[z];
  return s;
}

double KernelEvaluator::marginal(const ViewSample& a) const { return lookup(a).marginal; }

double kernel_eval(const FiniteTask& task, const ViewSample& a1, const ViewSample& a2) {
  const Vector q1 = tasklab::latent_posterior(task, a1);
  const Vector q2 = tasklab::latent_posterior(task, a2);
  double s = 0.0;
  for (std::size_t z = 0; z < q1.size(); ++z)
    if (task.p_z()[z] > 0.0) s += q1[z] * q2[z] / task.p_z()[z];
  return s;
}

double discrepancy(const PosPairOperator& op, std::span<const double> g) {
  if (g.size() != op.view_count()) throw DimensionError("discrepancy: g has wrong length");
  double s = 0.0;
  const auto& j = op.joint();
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = 0; b < g.size(); ++b) {
      const double d = g[a] - g[b];
      s += j(a, b) * d * d;
    }
  return s;
}

McEstimate discrepancy_mc(const FiniteTask& task, const std::function<double(const ViewSample&)>& g,
                          std::size_t pairs, Rng& rng) {
  if (pairs == 0) pairs = 8 * task.latent_count();
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto pair = tasklab::sample_pair(task, rng);
    const double d = g(pair.first) - g(pair.second);
    sum += d * d;
    sumsq += d * d * d * d;
  }
  McEstimate est;
  est.samples = pairs;
  est.mean = sum / static_cast<double>(pairs);
  const double var = pairs > 1
      ? std::max(0.0, (sumsq - pairs * est.mean * est.mean) / static_cast<double>(pairs - 1))
      : 0.0;
  est.std_error = std::sqrt(var / static_cast<double>(pairs));
  return est;
}

}  // namespace pairspec::pospair
