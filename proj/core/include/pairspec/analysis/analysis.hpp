// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pairspec/pospair/operator.hpp"
#include "pairspec/spectra/spectra.hpp"

namespace pairspec::analysis {

using numkit::DenseMatrix;
using numkit::Rng;
using numkit::Vector;
using pospair::PosPairOperator;
using tasklab::FiniteTask;
using tasklab::ViewSample;

// ---- Worst-case approximation over the invariance ball ----

/// Largest squared error E_p[(g - proj_F g)^2] over all g with discrepancy
/// `eps`. Rows of `functions` span F. Infinite when F misses a function that
/// is exactly invariant (an eigenvalue-1 direction).
double subspace_worst_case(const PosPairOperator& op, const DenseMatrix& functions, double eps);

/// Largest discrepancy over unit-norm members of the row span of `functions`.
double subspace_max_discrepancy(const PosPairOperator& op, const DenseMatrix& functions);

struct MinimaxReport {
  std::size_t d = 0;
  double eps = 0.0;
  double eigen_worst_case = 0.0;
  /// eps / (2 (1 - lambda_{d+1})).
  double theoretical = 0.0;
  std::vector<double> challenger_worst_cases;

  double best_challenger() const;
};

/// Compares the top-d eigenfunction span against `challengers` random spans.
/// Each challenger holds the eigenvalue-1 eigenspace plus Gaussian functions,
/// orthonormalized under p(a). Challenger i draws from rng.split(i).
MinimaxReport minimax_verify(const PosPairOperator& op, std::size_t d, double eps, std::size_t challengers,
                             const Rng& rng, std::size_t threads = 1);

struct MaximinReport {
  std::size_t d = 0;
  double eigen_value = 0.0;
  /// 2 (1 - lambda_d).
  double theoretical = 0.0;
  std::vector<double> challenger_values;

  double best_challenger() const;
};

/// Least-invariant unit-norm predictor in the top-d span versus random d-dim spans.
MaximinReport invariance_maximin_verify(const PosPairOperator& op, std::size_t d, std::size_t challengers,
                                        const Rng& rng, std::size_t threads = 1);

// ---- Smoothness assumption ----

/// Y takes value label_values[k] with probability label_law(z, k) given z,
/// independently of the view.
struct LabelLaw {
  Vector values;
  DenseMatrix law;
};

struct AssumptionSides {
  /// E_{p+}[(g(A1) - g(A2))^2]
  double lhs = 0.0;
  /// E[(g(A) - Y)^2]
  double rhs = 0.0;
};

AssumptionSides assumption_sides(const PosPairOperator& op, std::span<const double> g, const LabelLaw& labels);

/// 2 E_{Z,Y}[(E[g(A) | Z] - Y)^2], the exact gap 2 rhs - lhs.
double assumption_slack(const PosPairOperator& op, std::span<const double> g, const LabelLaw& labels);

LabelLaw random_label_law(std::size_t latents, std::size_t values, Rng& rng);

struct AssumptionReport {
  std::vector<AssumptionSides> trials;
  /// max over trials of lhs - 2 rhs.
  double max_violation = 0.0;
};

AssumptionReport assumption_bound_check(const FiniteTask& task, std::size_t trials, const Rng& rng,
                                        std::size_t threads = 1);

// ---- Linear prediction ----

/// Ridge solution of min sum_i w_i ||y_i - beta^T r_i||^2 + l2 ||beta||^2 (d x m).
/// Empty `weights` means unit weights. Throws SingularityError when the normal
/// matrix is singular.
DenseMatrix fit_linear(const DenseMatrix& rep, const DenseMatrix& targets, double l2,
                       std::span<const double> weights = {});

using Representation = std::function<DenseMatrix(const std::vector<ViewSample>&)>;

struct LabeledViews {
  std::vector<ViewSample> views;
  std::vector<std::size_t> labels;
};

/// Draws z ~ p(z), a ~ p(a | z) and labels a with the class of z.
LabeledViews sample_labeled(const FiniteTask& task, std::size_t n, Rng& rng);

struct DownstreamCell {
  double l2 = 0.0;
  std::size_t d = 0;
  double val_squared_error = 0.0;
  double val_top1_error = 0.0;
};

struct DownstreamReport {
  std::vector<DownstreamCell> grid;
  double chosen_l2 = 0.0;
  std::size_t chosen_d = 0;
  double test_squared_error = 0.0;
  double test_top1_error = 0.0;
};

/// Least squares on centered one-hot targets, argmax decoding. (l2, d) is chosen
/// by validation top-1 error, then validation squared error, then grid order;
/// d keeps the first d representation columns.
DownstreamReport downstream_eval(const FiniteTask& task, const Representation& rep, const LabeledViews& train,
                                 const LabeledViews& val, const LabeledViews& test, const std::vector<double>& l2_grid,
                                 const std::vector<std::size_t>& d_grid);

// ---- Excess-risk bound for constrained L1 regression ----

struct BoundSpec {
  /// g* = sum_i coefficients[i] f_i over the exact eigenbasis; missing entries are zero.
  Vector coefficients;
  std::size_t d = 1;
  double radius = 1.0;
  std::size_t n = 100;
  std::size_t trials = 10;
  /// Y = g*(A) + U with U uniform on [-noise, noise].
  double noise = 0.5;
  std::size_t iterations = 2000;
  /// Subgradient step at iteration t is step / sqrt(t).
  double step = 0.5;

  void validate() const;
};

struct BoundReport {
  double eps = 0.0;
  double beta_norm = 0.0;
  double estimation_term = 0.0;
  double radius_term = 0.0;
  double truncation_term = 0.0;
  double bound = 0.0;
  std::vector<double> excess;
  double mean_excess = 0.0;
  std::size_t trials_within = 0;
  /// Trials whose ERM objective ended above that of the clipped oracle coefficients.
  std::size_t unconverged = 0;

  bool holds() const { return mean_excess <= bound; }
};

/// Exact expected L1 risk of the linear predictor `beta` over the first
/// beta.size() eigenfunctions, minus the Bayes risk noise / 2.
double excess_risk(const spectra::EigenBasis& basis, std::span<const double> p_a, std::span<const double> target,
                   std::span<const double> beta, double noise);

BoundReport gen_bound_check(const FiniteTask& task, const BoundSpec& spec, const Rng& rng, std::size_t threads = 1);

// ---- Population loss minimizers ----

enum class LossKind { xent, logistic, spectral };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

struct LossMinimumReport {
  LossKind loss = LossKind::spectral;
  double at_minimizer = 0.0;
  std::vector<double> perturbed;
  /// (scale, loss at scale * K+) for 0.5 and 2, plus 3 for xent.
  std::vector<std::pair<double, double>> rescaled;
  /// -sum P^2 / (p p^T) for the spectral loss, otherwise NaN.
  double closed_form = 0.0;

  /// Every perturbation loses; rescaling loses too, except for xent where it must not matter.
  bool minimizer_wins() const;
  double scale_gap() const;
};

/// Population loss at K+ against `perturbations` multiplicative log-normal
/// perturbations of scale `spread` and global rescalings of K+.
LossMinimumReport loss_minimum_verify(const FiniteTask& task, LossKind loss, std::size_t perturbations,
                                      const Rng& rng, double spread = 0.1);

}  // namespace pairspec::analysis
