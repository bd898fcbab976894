// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "pairspec/analysis/analysis.hpp"
#include "pairspec/errors.hpp"
#include "pairspec/tasklab/generators.hpp"

using namespace pairspec;
using namespace pairspec::analysis;
using tasklab::gen_random_task;
using tasklab::overlapping_pair_task;

namespace {

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

// Works in eigenfunction coordinates c (g = sum c_i f_i), where E_p[g^2] = |c|^2
// and disc(g) = sum (2 - 2 lambda_i) c_i^2. Assumes F contains every
// eigenvalue-1 direction.
double oracle_worst_case(const PosPairOperator& op, const DenseMatrix& functions, double eps) {
  const auto basis = spectra::exact_eigenbasis(op);
  const std::size_t n = basis.size();
  Eigen::MatrixXd coords(n, functions.rows());
  for (std::size_t j = 0; j < functions.rows(); ++j) {
    const Vector c = spectra::decompose(basis, functions.row_span(j), op.p_a());
    for (std::size_t i = 0; i < n; ++i) coords(i, j) = c[i];
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(coords).householderQ() *
                            Eigen::MatrixXd::Identity(n, functions.rows());
  const Eigen::MatrixXd residual = Eigen::MatrixXd::Identity(n, n) - q * q.transpose();
  std::size_t k0 = 0;
  while (k0 < n && basis.eigenvalues[k0] > 1.0 - 1e-9) ++k0;
  const std::size_t m = n - k0;
  Eigen::MatrixXd cost = residual.bottomRightCorner(m, m);
  Eigen::MatrixXd budget = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < m; ++i) budget(i, i) = 2.0 - 2.0 * basis.eigenvalues[k0 + i];
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(cost, budget);
  return eps * ges.eigenvalues().maxCoeff();
}

FiniteTask two_block_task() {
  const DenseMatrix cond{{0.5, 0.5, 0, 0, 0, 0},   {0, 0.5, 0.5, 0, 0, 0},   {0, 0, 0, 0.5, 0.5, 0},
                         {0, 0, 0, 0, 0.5, 0.5}};
  return FiniteTask::enumerated({0.25, 0.25, 0.25, 0.25}, cond, std::vector<std::size_t>{0, 0, 1, 1});
}

spectra::EigenBasis basis_of(const FiniteTask& t) {
  return spectra::exact_eigenbasis(PosPairOperator::build_exact(t));
}

Representation eigen_rep(const spectra::EigenBasis& basis) {
  return [basis](const std::vector<tasklab::ViewSample>& views) {
    DenseMatrix out(views.size(), basis.size());
    for (std::size_t i = 0; i < views.size(); ++i)
      for (std::size_t k = 0; k < basis.size(); ++k) out(i, k) = basis.functions(k, views[i].id());
    return out;
  };
}

}  // namespace

TEST_CASE("minimax: overlapping pair task hand values") {
  const auto op = PosPairOperator::build_exact(overlapping_pair_task());
  const Rng rng(1, "minimax");
  const MinimaxReport d1 = minimax_verify(op, 1, 2.0, 50, rng);
  CHECK(d1.eigen_worst_case == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(d1.theoretical == doctest::Approx(2.0).epsilon(1e-12));
  const MinimaxReport d2 = minimax_verify(op, 2, 2.0, 50, rng);
  CHECK(d2.eigen_worst_case == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d2.theoretical == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d1.eigen_worst_case <= d1.best_challenger() + 1e-8);
  CHECK(d2.eigen_worst_case <= d2.best_challenger() + 1e-8);
  CHECK_THROWS_AS(minimax_verify(op, 3, 2.0, 1, rng), DimensionError);
  CHECK_THROWS_AS(minimax_verify(op, 1, -1.0, 1, rng), DomainError);
}

TEST_CASE("minimax: closed form matches a generalized-eigenproblem oracle") {
  Rng rng(2, "oracle");
  for (int trial = 0; trial < 5; ++trial) {
    const FiniteTask t = gen_random_task(2 + rng.uniform_int(6), 4 + rng.uniform_int(12), rng);
    const auto op = PosPairOperator::build_exact(t);
    const auto basis = spectra::exact_eigenbasis(op);
    const std::size_t n = op.view_count();
    for (std::size_t d = 1; d < n; ++d) {
      // Constant plus random functions: covers the invariant direction of a connected task.
      DenseMatrix f(d, n, 1.0);
      for (std::size_t i = 1; i < d; ++i)
        for (std::size_t a = 0; a < n; ++a) f(i, a) = rng.normal();
      const double eps = 0.1 + rng.uniform();
      const double got = subspace_worst_case(op, f, eps);
      CHECK(got == doctest::Approx(oracle_worst_case(op, f, eps)).epsilon(1e-8));
      const MinimaxReport r = minimax_verify(op, d, eps, 200, rng.split(d));
      CHECK(r.eigen_worst_case <= r.best_challenger() + 1e-8);
      if (basis.eigenvalues[d] < 1.0 - 1e-6) {
        CHECK(std::abs(r.eigen_worst_case - r.theoretical) <= 1e-6);
        CHECK(r.eigen_worst_case * (1.0 - basis.eigenvalues[d]) == doctest::Approx(eps / 2).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("minimax: subspaces missing an invariant function are unbounded") {
  Rng rng(3, "missing");
  const FiniteTask t = gen_random_task(4, 10, rng);
  const auto op = PosPairOperator::build_exact(t);
  DenseMatrix f(3, 10);
  for (double& x : f.data()) x = rng.normal();
  CHECK(std::isinf(subspace_worst_case(op, f, 0.5)));
  CHECK(std::isinf(subspace_worst_case(op, DenseMatrix(0, 10), 0.5)));
  DenseMatrix with_constant(1, 10, 1.0);
  CHECK(subspace_worst_case(op, with_constant, 0.0) == 0.0);

  // Two communicating classes: one constant is not enough, the indicators are.
  const auto split = PosPairOperator::build_exact(two_block_task());
  CHECK(std::isinf(subspace_worst_case(split, DenseMatrix(1, 6, 1.0), 1.0)));
  const DenseMatrix indicators{{1, 1, 1, 0, 0, 0}, {0, 0, 0, 1, 1, 1}};
  CHECK(std::isfinite(subspace_worst_case(split, indicators, 1.0)));
  const MinimaxReport r = minimax_verify(split, 1, 1.0, 10, Rng(3, "split"));
  CHECK(std::isinf(r.eigen_worst_case));
  CHECK(std::isinf(r.theoretical));
}

TEST_CASE("maximin: eigen span is least variable, matching the Rayleigh oracle") {
  const auto t3 = PosPairOperator::build_exact(overlapping_pair_task());
  const Rng rng(4, "maximin");
  CHECK(invariance_maximin_verify(t3, 2, 20, rng).eigen_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(invariance_maximin_verify(t3, 1, 20, rng).eigen_value) <= 1e-12);
  CHECK(invariance_maximin_verify(t3, 3, 20, rng).eigen_value == doctest::Approx(2.0).epsilon(1e-12));

  Rng draw(5, "tasks");
  for (int trial = 0; trial < 4; ++trial) {
    const FiniteTask t = gen_random_task(3 + draw.uniform_int(5), 5 + draw.uniform_int(10), draw);
    const auto op = PosPairOperator::build_exact(t);
    const auto basis = spectra::exact_eigenbasis(op);
    const std::size_t n = op.view_count();
    for (std::size_t d = 1; d <= n; ++d) {
      const MaximinReport r = invariance_maximin_verify(op, d, 200, draw.split(d));
      CHECK(std::abs(r.eigen_value - r.theoretical) <= 1e-8);
      CHECK(r.eigen_value <= r.best_challenger() + 1e-8);
    }
    // Rayleigh oracle on a random span, in eigen coordinates.
    DenseMatrix f(2, n);
    for (double& x : f.data()) x = draw.normal();
    Eigen::MatrixXd coords(n, 2);
    for (std::size_t j = 0; j < 2; ++j) {
      const Vector c = spectra::decompose(basis, f.row_span(j), op.p_a());
      for (std::size_t i = 0; i < n; ++i) coords(i, j) = c[i];
    }
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(coords).householderQ() *
                              Eigen::MatrixXd::Identity(n, 2);
    Eigen::VectorXd w(n);
    for (std::size_t i = 0; i < n; ++i) w(i) = 2.0 - 2.0 * basis.eigenvalues[i];
    const Eigen::MatrixXd small = q.transpose() * w.asDiagonal() * q;
    const double oracle = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(small).eigenvalues().maxCoeff();
    CHECK(subspace_max_discrepancy(op, f) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("assumption: both sides, slack identity and Monte-Carlo agreement") {
  Rng rng(6, "assume");
  const FiniteTask t = gen_random_task(4, 8, rng);
  const auto op = PosPairOperator::build_exact(t);
  const LabelLaw labels = random_label_law(4, 3, rng);

  // g(a) = E[Y | A = a].
  Vector g(8, 0.0);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t z = 0; z < 4; ++z) {
      const double post = op.p_z()[z] * op.cond()(z, a) / op.p_a()[a];
      for (std::size_t k = 0; k < 3; ++k) g[a] += post * labels.law(z, k) * labels.values[k];
    }
  const AssumptionSides s = assumption_sides(op, g, labels);
  CHECK(s.lhs <= 2.0 * s.rhs);
  CHECK(2.0 * s.rhs - s.lhs == doctest::Approx(assumption_slack(op, g, labels)).epsilon(1e-10));

  double lhs = 0.0, rhs = 0.0, lhs2 = 0.0, rhs2 = 0.0;
  const std::size_t draws = 200000;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto pair = tasklab::sample_pair(t, rng);
    const double dl = g[pair.first.id()] - g[pair.second.id()];
    const double y = labels.values[rng.categorical(labels.law.row_span(pair.latent))];
    const double dr = g[pair.first.id()] - y;
    lhs += dl * dl;
    lhs2 += dl * dl * dl * dl;
    rhs += dr * dr;
    rhs2 += dr * dr * dr * dr;
  }
  const double nd = static_cast<double>(draws);
  auto se = [&](double m, double m2) { return std::sqrt((m2 / nd - (m / nd) * (m / nd)) / nd); };
  CHECK(std::abs(lhs / nd - s.lhs) <= 4.0 * se(lhs, lhs2));
  CHECK(std::abs(rhs / nd - s.rhs) <= 4.0 * se(rhs, rhs2));

  // Constant g with Y equal to it.
  const LabelLaw constant{{0.7}, DenseMatrix(4, 1, 1.0)};
  const AssumptionSides c = assumption_sides(op, Vector(8, 0.7), constant);
  CHECK(c.lhs == doctest::Approx(0.0));
  CHECK(c.rhs == doctest::Approx(0.0));
}

TEST_CASE("assumption_bound_check: no violations, thread-count invariant") {
  Rng rng(7, "check");
  const FiniteTask t = gen_random_task(6, 12, rng);
  const AssumptionReport one = assumption_bound_check(t, 1000, Rng(7, "trials"), 1);
  CHECK(one.max_violation <= 1e-10);
  const AssumptionReport four = assumption_bound_check(t, 1000, Rng(7, "trials"), 4);
  CHECK(four.max_violation == one.max_violation);
  CHECK(four.trials.back().rhs == one.trials.back().rhs);
}

TEST_CASE("fit_linear: interpolation, orthonormal projection, ridge oracle") {
  const auto t3 = PosPairOperator::build_exact(overlapping_pair_task());
  const auto basis = spectra::exact_eigenbasis(t3);
  DenseMatrix rep(3, 2), target(3, 1);
  for (std::size_t a = 0; a < 3; ++a) {
    rep(a, 0) = basis.functions(0, a);
    rep(a, 1) = basis.functions(1, a);
    target(a, 0) = basis.functions(1, a);
  }
  const DenseMatrix beta = fit_linear(rep, target, 0.0, t3.p_a());
  CHECK(std::abs(beta(0, 0)) <= 1e-12);
  CHECK(beta(1, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const DenseMatrix y{{1, 2}, {3, 4}, {5, 6}};
  CHECK((fit_linear(DenseMatrix::identity(3), y, 0.0) - y).max_abs() <= 1e-12);

  const double r = 1.0 / std::sqrt(2.0);
  const DenseMatrix ortho{{r, 0}, {r, 0}, {0, 1}};
  CHECK((fit_linear(ortho, y, 0.0) - numkit::matmul_tn(ortho, y)).max_abs() <= 1e-12);

  Rng rng(8, "ridge");
  DenseMatrix x(20, 4), z(20, 2);
  for (double& v : x.data()) v = rng.normal();
  for (double& v : z.data()) v = rng.normal();
  const Eigen::MatrixXd ex = to_eigen(x), ez = to_eigen(z);
  const Eigen::MatrixXd oracle =
      (ex.transpose() * ex + 0.3 * Eigen::MatrixXd::Identity(4, 4)).ldlt().solve(ex.transpose() * ez);
  CHECK((to_eigen(fit_linear(x, z, 0.3)) - oracle).cwiseAbs().maxCoeff() <= 1e-12);

  const DenseMatrix dup{{1, 1}, {2, 2}, {3, 3}};
  CHECK_THROWS_AS(fit_linear(dup, y, 0.0), SingularityError);
  CHECK(fit_linear(dup, y, 0.1).all_finite());
  CHECK(fit_linear(DenseMatrix(3, 0), y, 0.0).rows() == 0);
  CHECK_THROWS_AS(fit_linear(DenseMatrix(0, 2), DenseMatrix(0, 1), 0.0), DimensionError);
}

TEST_CASE("downstream_eval: separable, chance level, empty representation") {
  const FiniteTask sep = two_block_task();
  Rng rng(9, "downstream");
  const auto train = sample_labeled(sep, 200, rng), val = sample_labeled(sep, 100, rng),
             test = sample_labeled(sep, 400, rng);
  const DownstreamReport r = downstream_eval(sep, eigen_rep(basis_of(sep)), train, val, test, {0.0, 1e-3}, {2});
  CHECK(r.test_top1_error == 0.0);
  CHECK(r.chosen_d == 2);
  CHECK(r.grid.size() == 2);

  const DownstreamReport empty = downstream_eval(sep, eigen_rep(basis_of(sep)), train, val, test, {0.0}, {0});
  CHECK(empty.test_squared_error == doctest::Approx(0.5).epsilon(1e-12));

  // Labels carried by latents whose view laws coincide.
  DenseMatrix cond(6, 10, 0.1);
  const FiniteTask noise = FiniteTask::enumerated(Vector(6, 1.0 / 6), cond, std::vector<std::size_t>{0, 1, 2, 0, 1, 2});
  Rng draw(10, "chance");
  DenseMatrix features(10, 4);
  for (double& v : features.data()) v = draw.normal();
  const Representation random_rep = [features](const std::vector<tasklab::ViewSample>& views) {
    DenseMatrix out(views.size(), 4);
    for (std::size_t i = 0; i < views.size(); ++i)
      for (std::size_t k = 0; k < 4; ++k) out(i, k) = features(views[i].id(), k);
    return out;
  };
  const DownstreamReport chance =
      downstream_eval(noise, random_rep, sample_labeled(noise, 500, draw), sample_labeled(noise, 300, draw),
                      sample_labeled(noise, 3000, draw), {1e-3, 1.0}, {1, 2, 4});
  CHECK(std::abs(chance.test_top1_error - 2.0 / 3.0) <= 0.1);

  CHECK_THROWS_AS(downstream_eval(sep, eigen_rep(basis_of(sep)), {}, val, test, {0.0}, {1}), ConfigError);
  CHECK_THROWS_AS(downstream_eval(overlapping_pair_task(), eigen_rep(basis_of(sep)), train, val, test, {0.0}, {1}),
                  ConfigError);
}

TEST_CASE("excess_risk: closed form matches Monte Carlo") {
  const auto op = PosPairOperator::build_exact(overlapping_pair_task());
  const auto basis = spectra::exact_eigenbasis(op);
  const Vector target{0.3, -0.2, 0.9};
  const Vector beta{0.1, 0.4};
  Rng rng(11, "mc-risk");
  const double s = 0.5;
  double sum = 0.0, sum2 = 0.0;
  const std::size_t draws = 400000;
  for (std::size_t i = 0; i < draws; ++i) {
    const std::size_t a = rng.categorical(op.p_a());
    const double pred = beta[0] * basis.functions(0, a) + beta[1] * basis.functions(1, a);
    const double loss = std::abs(pred - target[a] - rng.uniform(-s, s));
    sum += loss;
    sum2 += loss * loss;
  }
  const double nd = static_cast<double>(draws), mean = sum / nd;
  const double se = std::sqrt((sum2 / nd - mean * mean) / nd);
  CHECK(std::abs(excess_risk(basis, op.p_a(), target, beta, s) - (mean - 0.5 * s)) <= 4.0 * se);
  CHECK(excess_risk(basis, op.p_a(), target, Vector{}, 0.0) == doctest::Approx(0.25 * 0.3 + 0.5 * 0.2 + 0.25 * 0.9));
}

TEST_CASE("gen_bound_check: terms on hand configurations") {
  const FiniteTask t3 = overlapping_pair_task();
  BoundSpec spec;
  spec.coefficients = {1.0, 0.0, 0.5};
  spec.d = 2;
  spec.radius = 2.0;
  spec.n = 100;
  spec.trials = 10;
  const BoundReport r = gen_bound_check(t3, spec, Rng(12, "bound"));
  CHECK(r.eps == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.truncation_term == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.estimation_term == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(r.radius_term == 0.0);
  CHECK(r.trials_within == 10);
  CHECK(r.holds());
  CHECK(r.unconverged == 0);

  spec.coefficients = {1.0};
  spec.radius = 1.0;
  spec.d = 1;
  spec.n = 400;
  const BoundReport realizable = gen_bound_check(t3, spec, Rng(12, "realizable"));
  CHECK(std::abs(realizable.eps) <= 1e-14);
  CHECK(realizable.truncation_term <= 1e-7);
  CHECK(realizable.mean_excess <= 0.01);
  CHECK(realizable.holds());

  spec.coefficients = {1.0, 0.5};
  spec.d = 2;
  spec.radius = 0.0;
  const BoundReport zero = gen_bound_check(t3, spec, Rng(12, "zero"));
  CHECK(zero.estimation_term == 0.0);
  CHECK(zero.radius_term == doctest::Approx(std::sqrt(2.0 * 1.25)).epsilon(1e-12));
  const auto op = PosPairOperator::build_exact(t3);
  const auto basis = spectra::exact_eigenbasis(op);
  Vector target(3);
  for (std::size_t a = 0; a < 3; ++a) target[a] = basis.functions(0, a) + 0.5 * basis.functions(1, a);
  const double predict_zero = excess_risk(basis, op.p_a(), target, Vector{}, 0.5);
  for (double e : zero.excess) CHECK(e == doctest::Approx(predict_zero).epsilon(1e-12));
  CHECK(zero.holds());

  spec.n = 0;
  CHECK_THROWS_AS(gen_bound_check(t3, spec, Rng(1, "x")), ConfigError);
}

TEST_CASE("gen_bound_check: random configurations, thread-count invariant") {
  Rng rng(13, "configs");
  for (int cfg = 0; cfg < 4; ++cfg) {
    const FiniteTask t = gen_random_task(2 + rng.uniform_int(3), 3 + rng.uniform_int(4), rng);
    const std::size_t views = t.view_count();
    BoundSpec spec;
    spec.coefficients.resize(views);
    for (double& c : spec.coefficients) c = 0.5 * rng.normal();
    spec.d = 1 + rng.uniform_int(views);
    spec.radius = 0.5 + 2.0 * rng.uniform();
    spec.n = 50 + rng.uniform_int(200);
    spec.trials = 10;
    const BoundReport one = gen_bound_check(t, spec, rng.split("trials"), 1);
    CHECK(one.trials_within == 10);
    const BoundReport three = gen_bound_check(t, spec, rng.split("trials"), 3);
    CHECK(three.excess == one.excess);
  }
}

TEST_CASE("loss_minimum_verify: Table 1 minimizers on the overlapping pair task") {
  const FiniteTask t3 = overlapping_pair_task();
  const Rng rng(14, "minima");
  const LossMinimumReport spectral = loss_minimum_verify(t3, LossKind::spectral, 100, rng);
  CHECK(spectral.at_minimizer == doctest::Approx(-1.25).epsilon(1e-14));
  CHECK(spectral.closed_form == doctest::Approx(-1.25).epsilon(1e-14));
  CHECK(spectral.minimizer_wins());

  const LossMinimumReport xent = loss_minimum_verify(t3, LossKind::xent, 100, rng);
  CHECK(xent.minimizer_wins());
  CHECK(xent.scale_gap() <= 1e-14);
  CHECK(std::isnan(xent.closed_form));

  const LossMinimumReport logistic = loss_minimum_verify(t3, LossKind::logistic, 100, rng);
  CHECK(logistic.minimizer_wins());
  for (const auto& [scale, value] : logistic.rescaled) CHECK(value > logistic.at_minimizer);

  Rng draw(15, "random");
  for (int trial = 0; trial < 3; ++trial) {
    const FiniteTask t = gen_random_task(3 + draw.uniform_int(4), 4 + draw.uniform_int(8), draw);
    for (LossKind k : {LossKind::xent, LossKind::logistic, LossKind::spectral})
      CHECK(loss_minimum_verify(t, k, 100, draw.split(trial)).minimizer_wins());
  }
  CHECK(parse_loss_kind("logistic") == LossKind::logistic);
  CHECK_THROWS_AS(parse_loss_kind("hinge"), ConfigError);
}
