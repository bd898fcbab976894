// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "pairspec/errors.hpp"
#include "pairspec/numkit/linalg.hpp"
#include "pairspec/pospair/operator.hpp"
#include "pairspec/tasklab/generators.hpp"

using namespace pairspec;
using namespace pairspec::pospair;
using tasklab::gen_random_task;
using tasklab::overlapping_pair_task;

namespace {

// Brute-force oracle straight from the pair definition.
double brute_discrepancy(const FiniteTask& t, std::span<const double> g) {
  double s = 0.0;
  const std::size_t n = t.view_count();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double joint = 0.0;
      for (std::size_t z = 0; z < t.latent_count(); ++z)
        joint += t.cond()(z, a) * t.cond()(z, b) * t.p_z()[z];
      s += joint * (g[a] - g[b]) * (g[a] - g[b]);
    }
  return s;
}

}  // namespace

TEST_CASE("build_exact: overlapping pair task kernel") {
  const auto op = PosPairOperator::build_exact(overlapping_pair_task());
  const DenseMatrix expected{{2, 1, 0}, {1, 1, 1}, {0, 1, 2}};
  CHECK((op.kernel() - expected).max_abs() < 1e-14);
  const auto row1 = op.transition_row(1);
  CHECK(row1[0] == doctest::Approx(0.25));
  CHECK(row1[1] == doctest::Approx(0.5));
  CHECK(row1[2] == doctest::Approx(0.25));
  const auto row0 = op.transition_row(0);
  CHECK(row0[0] == doctest::Approx(0.5));
  CHECK(row0[1] == doctest::Approx(0.5));
  CHECK(row0[2] == 0.0);
}

TEST_CASE("build_exact: single latent and deterministic augmentation") {
  const auto single = PosPairOperator::build_exact(
      FiniteTask::enumerated({1.0}, DenseMatrix{{0.25, 0.25, 0.5}}));
  CHECK((single.kernel() - DenseMatrix(3, 3, 1.0)).max_abs() < 1e-14);
  for (std::size_t a = 0; a < 3; ++a) {
    const auto row = single.transition_row(a);
    for (std::size_t b = 0; b < 3; ++b) CHECK(row[b] == doctest::Approx(single.p_a()[b]));
  }

  const auto det = PosPairOperator::build_exact(
      FiniteTask::enumerated({0.5, 0.5}, DenseMatrix{{1, 0}, {0, 1}}));
  CHECK((det.kernel() - DenseMatrix{{2, 0}, {0, 2}}).max_abs() < 1e-14);
}

TEST_CASE("build_exact: rejects zero-marginal views and multiset tasks") {
  CHECK_THROWS_AS(PosPairOperator::build_exact(FiniteTask::enumerated({1.0}, DenseMatrix{{1.0, 0.0}})),
                  CoverageError);
  const FiniteTask m = FiniteTask::multiset(1, 1, {1.0}, {{{1.0}}});
  CHECK_THROWS_AS(PosPairOperator::build_exact(m), DimensionError);
}

TEST_CASE("kernel_eval: matches the matrix and handles edge cases") {
  const FiniteTask t3 = overlapping_pair_task();
  using tasklab::ViewSample;
  CHECK(kernel_eval(t3, ViewSample::enumerated(0), ViewSample::enumerated(2)) == 0.0);
  const FiniteTask single = FiniteTask::enumerated({1.0}, DenseMatrix{{0.3, 0.7}});
  CHECK(kernel_eval(single, ViewSample::enumerated(1), ViewSample::enumerated(1)) ==
        doctest::Approx(1.0));

  const double e = 1e-300;
  const FiniteTask disjoint = FiniteTask::multiset(
      2, 2, {0.5, 0.5}, {{{0.5 - e, 0.5 - e, e, e}}, {{e, e, 0.5 - e, 0.5 - e}}});
  CHECK(kernel_eval(disjoint, ViewSample::multiset({0, 1}), ViewSample::multiset({2, 3})) < 1e-200);

  Rng rng(9, "keval");
  for (int trial = 0; trial < 5; ++trial) {
    const FiniteTask t = gen_random_task(4, 7, rng);
    const auto op = PosPairOperator::build_exact(t);
    const DenseMatrix k = op.kernel();
    KernelEvaluator cached(t);
    for (std::size_t a = 0; a < 7; ++a)
      for (std::size_t b = 0; b < 7; ++b) {
        const auto va = ViewSample::enumerated(a), vb = ViewSample::enumerated(b);
        CHECK(std::abs(kernel_eval(t, va, vb) - k(a, b)) <= 1e-12 * std::max(1.0, k(a, b)));
        CHECK(std::abs(cached(va, vb) - k(a, b)) <= 1e-12 * std::max(1.0, k(a, b)));
      }
  }
  const FiniteTask gap = FiniteTask::enumerated({0.5, 0.5}, DenseMatrix{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
  CHECK_THROWS_AS(kernel_eval(gap, ViewSample::enumerated(2), ViewSample::enumerated(0)),
                  UnreachableViewError);
}

TEST_CASE("discrepancy: hand values on the overlapping pair task") {
  const FiniteTask t = overlapping_pair_task();
  const auto op = PosPairOperator::build_exact(t);
  const Vector constant{3, 3, 3};
  CHECK(discrepancy(op, constant) == 0.0);
  const double r = std::sqrt(2.0);
  const Vector f2{-r, 0, r};
  CHECK(discrepancy(op, f2) == doctest::Approx(1.0).epsilon(1e-14));
  // g = (1, 0, 0): only (a1,a2) and (a2,a1) contribute, 2 * p+(a1,a2) = 2 * 0.125.
  const Vector g{1, 0, 0};
  CHECK(brute_discrepancy(t, g) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(discrepancy(op, g) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("pospair invariants on random tasks") {
  Rng rng(17, "inv");
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t nz = 2 + rng.uniform_int(6), na = 2 + rng.uniform_int(12);
    const FiniteTask t = gen_random_task(nz, na, rng);
    const auto op = PosPairOperator::build_exact(t);
    const auto& j = op.joint();
    double total = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < na; ++b) row += j(a, b);
      total += row;
      CHECK(std::abs(row - op.p_a()[a]) < 1e-12);
      const auto tr = op.transition_row(a);
      double trs = 0.0;
      for (double x : tr) trs += x;
      CHECK(std::abs(trs - 1.0) < 1e-12);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(numkit::relative_asymmetry(j) == 0.0);

    const DenseMatrix k = op.kernel();
    const DenseMatrix phi = op.feature_matrix();
    CHECK((numkit::matmul_tn(phi, phi) - k).max_abs() <= 1e-10 * std::max(1.0, k.max_abs()));
    Vector sq(na);
    for (std::size_t a = 0; a < na; ++a) sq[a] = std::sqrt(op.p_a()[a]);
    const DenseMatrix m_from_k = numkit::scale_rows_cols(k, sq, sq);
    CHECK((m_from_k - op.symmetric()).max_abs() < 1e-12);
    CHECK(numkit::sym_eigh(m_from_k).eigenvalues.back() >= -1e-10);

    const DenseMatrix l = op.laplacian();
    double lmax = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < na; ++b) s += l(a, b);
      lmax = std::max(lmax, std::abs(s));
    }
    CHECK(lmax < 1e-12);

    Vector g(na);
    for (double& x : g) x = rng.normal();
    const Vector lg = numkit::matvec(l, g);
    CHECK(std::abs(discrepancy(op, g) - 2 * numkit::dot(g, lg)) < 1e-12);
    CHECK(std::abs(discrepancy(op, g) - brute_discrepancy(t, g)) < 1e-12);

    // Detailed balance p(a) P(a'|a) = p(a') P(a|a').
    for (std::size_t a = 0; a < na; ++a) {
      const auto ra = op.transition_row(a);
      for (std::size_t b = 0; b < na; ++b) {
        const auto rb = op.transition_row(b);
        CHECK(std::abs(op.p_a()[a] * ra[b] - op.p_a()[b] * rb[a]) < 1e-15);
      }
    }
  }
}

TEST_CASE("discrepancy_mc: agrees with the exact value within standard error") {
  const FiniteTask t = overlapping_pair_task();
  const auto op = PosPairOperator::build_exact(t);
  const Vector g{1.0, -0.5, 2.0};
  Rng rng(3, "mc");
  const auto est = discrepancy_mc(t, [&](const tasklab::ViewSample& v) { return g[v.id()]; }, 40000, rng);
  CHECK(std::abs(est.mean - discrepancy(op, g)) < 4 * est.std_error);
  CHECK(est.samples == 40000);
  Rng rng2(3, "mc");
  const auto dflt = discrepancy_mc(t, [&](const tasklab::ViewSample& v) { return g[v.id()]; }, 0, rng2);
  CHECK(dflt.samples == 16);
}
