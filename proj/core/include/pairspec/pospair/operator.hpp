// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <span>

#include "pairspec/tasklab/task.hpp"

namespace pairspec::pospair {

using numkit::DenseMatrix;
using numkit::Rng;
using numkit::Vector;
using tasklab::FiniteTask;
using tasklab::ViewSample;

/// Exact positive-pair matrices of an enumerated task.
class PosPairOperator {
 public:
  /// Throws CoverageError for a view with zero marginal.
  static PosPairOperator build_exact(const FiniteTask& task);

  std::size_t view_count() const noexcept { return p_a_.size(); }
  std::size_t latent_count() const noexcept { return p_z_.size(); }
  const Vector& p_a() const noexcept { return p_a_; }
  const Vector& p_z() const noexcept { return p_z_; }
  /// P_AA[i][j] = p+(i, j).
  const DenseMatrix& joint() const noexcept { return joint_; }
  /// P_{Z->A}: row z is p(. | z).
  const DenseMatrix& cond() const noexcept { return cond_; }

  /// K+ = D_A^-1 P_AA D_A^-1.
  DenseMatrix kernel() const;
  /// Phi = D_Z^{1/2} P_{Z->A} D_A^-1, so Phi^T Phi = K+.
  DenseMatrix feature_matrix() const;
  /// P_{A<-A} = P_AA D_A^-1; column a is p+(. | a).
  DenseMatrix transition() const;
  /// M = D_A^{-1/2} P_AA D_A^{-1/2}.
  DenseMatrix symmetric() const;
  /// L = D_A - P_AA.
  DenseMatrix laplacian() const;
  /// p+(. | a).
  Vector transition_row(std::size_t a) const;

 private:
  Vector p_a_;
  Vector p_z_;
  DenseMatrix cond_;
  DenseMatrix joint_;
};

/// Kernel evaluator for any task, memoizing p(z | a) per view. Thread-safe.
/// The task must outlive the evaluator.
class KernelEvaluator {
 public:
  explicit KernelEvaluator(const FiniteTask& task) : task_(task) {}
  KernelEvaluator(const KernelEvaluator&) = delete;
  KernelEvaluator& operator=(const KernelEvaluator&) = delete;

  /// K+(a1, a2) = sum_z p(z|a1) p(z|a2) / p(z).
  double operator()(const ViewSample& a1, const ViewSample& a2) const;
  double marginal(const ViewSample& a) const;
  const FiniteTask& task() const noexcept { return task_; }

 private:
  struct Entry {
    Vector posterior;
    double marginal;
  };
  const Entry& lookup(const ViewSample& a) const;

  const FiniteTask& task_;
  mutable std::mutex mutex_;
  mutable std::map<ViewSample, Entry> cache_;
};

/// Uncached single evaluation; throws UnreachableViewError for a zero-marginal view.
double kernel_eval(const FiniteTask& task, const ViewSample& a1, const ViewSample& a2);

/// Exact sum over pairs of p+(a1, a2) (g(a1) - g(a2))^2.
double discrepancy(const PosPairOperator& op, std::span<const double> g);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte-Carlo discrepancy over sampled positive pairs. `pairs` = 0 selects
/// 8 pairs per latent.
McEstimate discrepancy_mc(const FiniteTask& task, const std::function<double(const ViewSample&)>& g,
                          std::size_t pairs, Rng& rng);

}  // namespace pairspec::pospair
