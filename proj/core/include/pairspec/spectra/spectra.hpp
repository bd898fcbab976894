// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "pairspec/pospair/operator.hpp"

namespace pairspec::spectra {

using numkit::DenseMatrix;
using numkit::Rng;
using numkit::Vector;
using pospair::PosPairOperator;
using tasklab::FiniteTask;
using tasklab::ViewSample;

using KernelFn = std::function<double(const ViewSample&, const ViewSample&)>;

/// Rows of `functions` are f_i evaluated on every view.
struct EigenBasis {
  DenseMatrix functions;
  Vector eigenvalues;
  std::size_t size() const noexcept { return eigenvalues.size(); }
};

/// Rows of `projections` are h_i on the support views.
struct PcaResult {
  DenseMatrix projections;
  Vector variances;
  /// Full eigenvalue list of the weighted Gram operator, negatives included.
  Vector spectrum;
  bool not_psd_warning = false;
};

/// Flips each row so its largest-magnitude entry is positive (lowest index on ties).
void normalize_signs(DenseMatrix& rows);

EigenBasis exact_eigenbasis(const PosPairOperator& op);
/// Uncentered PCA of phi+ under p(a), via the latent-space covariance
/// Phi D_A Phi^T. Returns |A| components, zero-variance ones padded with h = 0.
PcaResult population_kpca(const PosPairOperator& op);

/// KPCA of a weighted Gram matrix: eigendecomposition of W^1/2 G W^1/2. Components
/// with eigenvalue at most 1e-10 of the largest magnitude are treated as zero.
PcaResult kpca_from_gram(const DenseMatrix& gram, std::span<const double> weights, std::size_t top);

/// KPCA on a weighted view sample, retaining what the Nystrom extension needs.
class KernelPca {
 public:
  KernelPca(KernelFn kernel, std::vector<ViewSample> support, Vector weights, std::size_t top);

  const PcaResult& result() const noexcept { return result_; }
  const std::vector<ViewSample>& support() const noexcept { return support_; }
  /// h_i(a) = sum_j sqrt(w_j) K(a, a_j) v_ij / sqrt(mu_i) for each retained component.
  Vector project(const ViewSample& a) const;

 private:
  KernelFn kernel_;
  std::vector<ViewSample> support_;
  Vector sqrt_w_;
  DenseMatrix vectors_;  // support x retained
  PcaResult result_;
};

/// phi_hat(a) = pinv_sqrt(K(S, S)) K(S, a).
class NystromMap {
 public:
  NystromMap(KernelFn kernel, std::vector<ViewSample> landmarks,
             std::optional<double> cutoff = std::nullopt);

  std::size_t dim() const noexcept { return landmarks_.size(); }
  const std::vector<ViewSample>& landmarks() const noexcept { return landmarks_; }
  const DenseMatrix& whitening() const noexcept { return whitening_; }
  Vector features(const ViewSample& a) const;
  /// Rows are phi_hat of each view.
  DenseMatrix feature_rows(const std::vector<ViewSample>& views) const;

 private:
  KernelFn kernel_;
  std::vector<ViewSample> landmarks_;
  DenseMatrix whitening_;
};

/// Mean over rows a of ||K_hat(a, .) - K(a, .)|| / ||K(a, .)|| where K_hat is
/// the Nystrom Gram on `views` and `exact` is the reference Gram.
double nystrom_relative_error(const NystromMap& map, const std::vector<ViewSample>& views,
                              const DenseMatrix& exact);

/// c_i = sum_a p(a) f_i(a) g(a).
Vector decompose(const EigenBasis& basis, std::span<const double> g, std::span<const double> p_a);
/// sum_i (2 - 2 lambda_i) c_i^2.
double predicted_discrepancy(const EigenBasis& basis, std::span<const double> c);

/// Entry (i, j) = (E_p[f_i g_j])^2 after normalizing every row to E_p[f^2] = 1.
/// Rows of `first` index the result rows; zero rows give zero entries.
DenseMatrix alignment_matrix(const DenseMatrix& first, const DenseMatrix& second,
                             std::span<const double> weights);

/// Contiguous index ranges [begin, end) of eigenvalues within `tol` of their neighbour.
std::vector<std::pair<std::size_t, std::size_t>> eigen_groups(std::span<const double> eigenvalues,
                                                              double tol = 1e-6);

/// For learned component j (row j of alignment(learned, exact)), the sum of
/// its alignment over the exact eigenspace group containing index j.
Vector group_alignment(const DenseMatrix& alignment, std::span<const double> exact_eigenvalues,
                       double tol = 1e-6);

/// 1 - disc(f)/2 after normalizing f to unit E_p[f^2].
double recover_eigenvalue(const PosPairOperator& op, std::span<const double> f);
/// Monte-Carlo version for any task: normalization from `norm_samples`
/// marginal draws, discrepancy from `pairs` positive pairs.
double recover_eigenvalue_mc(const FiniteTask& task, const std::function<double(const ViewSample&)>& f,
                             std::size_t norm_samples, std::size_t pairs, Rng& rng);

/// Sine of the largest principal angle between the row spans of `a` and `b`
/// under the p-weighted inner product.
double subspace_angle_sin(const DenseMatrix& a, const DenseMatrix& b, std::span<const double> weights);

/// sqrt(sum p_i p_j (K_hat - K+)_ij^2 / sum p_i p_j (K+)_ij^2).
double weighted_kernel_error(const DenseMatrix& k_hat, const PosPairOperator& op);

/// Learned kernel on every view of an enumerated task, read against the exact spectrum.
struct SpectrumComparison {
  PcaResult pca;
  /// Retained KPCA projections rescaled to unit E_p norm.
  DenseMatrix functions;
  /// Per component: discrepancy of the normalized function, and 1 - disc / 2.
  Vector discrepancy;
  Vector recovered;
  /// Row i: learned component i against every exact eigenfunction.
  DenseMatrix alignment;
  Vector group_alignment;
  double kernel_error = 0.0;

  /// |disc_i - (2 - 2 sigma_i^2)|.
  Vector residuals() const;
  /// Sum of the positive part of the full KPCA spectrum.
  double spectrum_sum() const;
};

SpectrumComparison compare_spectrum(const DenseMatrix& gram, const PosPairOperator& op, std::size_t top);

/// Enumerated view list 0..n-1.
std::vector<ViewSample> all_views(std::size_t n);

}  // namespace pairspec::spectra
