// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "pairspec/errors.hpp"
#include "pairspec/numkit/linalg.hpp"
#include "pairspec/spectra/spectra.hpp"
#include "pairspec/tasklab/generators.hpp"

using namespace pairspec;
using namespace pairspec::spectra;
using tasklab::gen_random_task;
using tasklab::overlapping_pair_task;

namespace {

double weighted_inner(std::span<const double> p, std::span<const double> a, std::span<const double> b) {
  return numkit::weighted_dot(p, a, b);
}

KernelFn matrix_kernel(const DenseMatrix& k) {
  return [k](const ViewSample& a, const ViewSample& b) { return k(a.id(), b.id()); };
}

}  // namespace

TEST_CASE("exact_eigenbasis: overlapping pair task") {
  const auto op = PosPairOperator::build_exact(overlapping_pair_task());
  const EigenBasis basis = exact_eigenbasis(op);
  CHECK(std::abs(basis.eigenvalues[0] - 1.0) < 1e-12);
  CHECK(std::abs(basis.eigenvalues[1] - 0.5) < 1e-12);
  CHECK(std::abs(basis.eigenvalues[2]) < 1e-12);
  const double r = std::sqrt(2.0);
  const DenseMatrix expected{{1, 1, 1}, {r, 0, -r}, {1, -1, 1}};
  CHECK((basis.functions - expected).max_abs() < 1e-12);
}

TEST_CASE("exact_eigenbasis: single latent and disconnected classes") {
  const auto single = PosPairOperator::build_exact(FiniteTask::enumerated({1.0}, DenseMatrix{{0.2, 0.3, 0.5}}));
  const auto b1 = exact_eigenbasis(single);
  CHECK(std::abs(b1.eigenvalues[0] - 1.0) < 1e-12);
  CHECK(std::abs(b1.eigenvalues[1]) < 1e-12);
  CHECK(std::abs(b1.eigenvalues[2]) < 1e-12);

  const DenseMatrix cond{{0.5, 0.5, 0, 0}, {0.5, 0.5, 0, 0}, {0, 0, 0.3, 0.7}, {0, 0, 0.3, 0.7}};
  const auto op = PosPairOperator::build_exact(FiniteTask::enumerated({0.25, 0.25, 0.25, 0.25}, cond));
  const auto basis = exact_eigenbasis(op);
  CHECK(std::abs(basis.eigenvalues[0] - 1.0) < 1e-12);
  CHECK(std::abs(basis.eigenvalues[1] - 1.0) < 1e-12);
  const DenseMatrix indicators{{1, 1, 0, 0}, {0, 0, 1, 1}};
  CHECK(subspace_angle_sin(basis.functions.block(0, 0, 2, 4), indicators, op.p_a()) < 1e-7);
}

TEST_CASE("exact_eigenbasis: orthonormal, fixed point, spectrum in [-1, 1]") {
  Rng rng(3, "basis");
  for (int trial = 0; trial < 10; ++trial) {
    const FiniteTask t = gen_random_task(2 + rng.uniform_int(8), 3 + rng.uniform_int(30), rng);
    const auto op = PosPairOperator::build_exact(t);
    const auto basis = exact_eigenbasis(op);
    const std::size_t n = op.view_count();
    CHECK(std::abs(basis.eigenvalues[0] - 1.0) < 1e-10);
    for (double lam : basis.eigenvalues) {
      CHECK(lam <= 1.0 + 1e-10);
      CHECK(lam >= -1.0 - 1e-10);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double ip = weighted_inner(op.p_a(), basis.functions.row_span(i), basis.functions.row_span(j));
        CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-8);
      }
      for (std::size_t a = 0; a < n; ++a) {
        const auto row = op.transition_row(a);
        const double next = numkit::dot(row, basis.functions.row_span(i));
        CHECK(std::abs(next - basis.eigenvalues[i] * basis.functions(i, a)) < 1e-8);
      }
    }
    const double f0 = basis.functions(0, 0);
    for (std::size_t a = 0; a < n; ++a) CHECK(std::abs(basis.functions(0, a) - f0) < 1e-8);
  }
}

TEST_CASE("population_kpca: Theorem-3 projections on the overlapping pair task") {
  const auto op = PosPairOperator::build_exact(overlapping_pair_task());
  const PcaResult pca = population_kpca(op);
  CHECK(std::abs(pca.variances[0] - 1.0) < 1e-12);
  CHECK(std::abs(pca.variances[1] - 0.5) < 1e-12);
  CHECK(std::abs(pca.variances[2]) < 1e-12);
  CHECK(std::abs(pca.projections(1, 0) - 1.0) < 1e-12);
  CHECK(std::abs(pca.projections(1, 1)) < 1e-12);
  CHECK(std::abs(pca.projections(1, 2) + 1.0) < 1e-12);

  const auto single = PosPairOperator::build_exact(FiniteTask::enumerated({1.0}, DenseMatrix{{0.5, 0.5}}));
  const PcaResult sp = population_kpca(single);
  CHECK(std::abs(sp.variances[0] - 1.0) < 1e-12);
  CHECK(std::abs(sp.projections(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(sp.projections(0, 1) - 1.0) < 1e-12);
}

TEST_CASE("population_kpca: subspaces match eigenfunctions on random 20-view tasks") {
  Rng rng(4, "kpca");
  for (int trial = 0; trial < 5; ++trial) {
    const FiniteTask t = gen_random_task(8, 20, rng);
    const auto op = PosPairOperator::build_exact(t);
    const auto basis = exact_eigenbasis(op);
    const auto pca = population_kpca(op);
    for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(pca.variances[i] - basis.eigenvalues[i]) < 1e-8);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 20; ++j) {
        const double ip = weighted_inner(op.p_a(), pca.projections.row_span(i), pca.projections.row_span(j));
        CHECK(std::abs(ip - (i == j ? pca.variances[i] : 0.0)) < 1e-8);
      }
    for (std::size_t d = 1; d < 8; ++d) {
      if (basis.eigenvalues[d - 1] - basis.eigenvalues[d] <= 1e-6) continue;
      CHECK(subspace_angle_sin(pca.projections.block(0, 0, d, 20), basis.functions.block(0, 0, d, 20),
                               op.p_a()) < 1e-6);
    }
  }
}

TEST_CASE("kpca_from_kernel: K+ on the full population matches population_kpca") {
  Rng rng(5, "kfk");
  const FiniteTask t = gen_random_task(5, 12, rng);
  const auto op = PosPairOperator::build_exact(t);
  const auto pop = population_kpca(op);
  const KernelPca kp(matrix_kernel(op.kernel()), all_views(12), op.p_a(), 12);
  const auto& res = kp.result();
  CHECK(res.variances.size() == 5);
  for (std::size_t i = 0; i < res.variances.size(); ++i) {
    CHECK(std::abs(res.variances[i] - pop.variances[i]) < 1e-8);
    for (std::size_t a = 0; a < 12; ++a) CHECK(std::abs(res.projections(i, a) - pop.projections(i, a)) < 1e-8);
  }
  // Nystrom extension reproduces the projections on the support.
  for (std::size_t a = 0; a < 12; ++a) {
    const Vector h = kp.project(ViewSample::enumerated(a));
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(h[i] - res.projections(i, a)) < 1e-8);
  }
}

TEST_CASE("kpca_from_gram: constant kernel, rank bound, symmetry and PSD flags") {
  const Vector w{0.2, 0.3, 0.5};
  const auto c = kpca_from_gram(DenseMatrix(3, 3, 1.0), w, 3);
  CHECK(c.variances.size() == 1);
  CHECK(c.variances[0] == doctest::Approx(1.0));
  for (std::size_t a = 0; a < 3; ++a) CHECK(c.projections(0, a) == doctest::Approx(1.0));

  Rng rng(6, "rank");
  DenseMatrix h(10, 2);
  for (double& x : h.data()) x = rng.normal();
  const Vector uw(10, 0.1);
  const auto lin = kpca_from_gram(numkit::matmul_nt(h, h), uw, 10);
  std::size_t nonzero = 0;
  for (double v : lin.variances) nonzero += v > 1e-10;
  CHECK(nonzero <= 2);

  CHECK_THROWS_AS(kpca_from_gram(DenseMatrix{{1, 0.5}, {0.4, 1}}, Vector{0.5, 0.5}, 2), SymmetryError);
  const auto indefinite = kpca_from_gram(DenseMatrix{{1, 0}, {0, -1}}, Vector{0.5, 0.5}, 2);
  CHECK(indefinite.not_psd_warning);
  CHECK(indefinite.variances.size() == 1);
  CHECK(indefinite.spectrum.back() == doctest::Approx(-0.5));
}

TEST_CASE("nystrom: full landmarks are exact, scalar case, partial landmarks") {
  Rng rng(7, "nys");
  const FiniteTask t = gen_random_task(6, 15, rng);
  const auto op = PosPairOperator::build_exact(t);
  const DenseMatrix k = op.kernel();
  const NystromMap full(matrix_kernel(k), all_views(15));
  const DenseMatrix f = full.feature_rows(all_views(15));
  CHECK((numkit::matmul_nt(f, f) - k).max_abs() < 1e-8);
  CHECK(nystrom_relative_error(full, all_views(15), k) < 1e-8);

  const DenseMatrix four{{4.0}};
  const NystromMap scalar(matrix_kernel(four), all_views(1));
  CHECK(scalar.features(ViewSample::enumerated(0))[0] == doctest::Approx(2.0));

  CHECK_THROWS_AS(NystromMap(matrix_kernel(k), {ViewSample::enumerated(1), ViewSample::enumerated(1)}),
                  DimensionError);

  // Full-landmark Nystrom projections agree with KPCA up to rotation.
  const KernelPca kp(matrix_kernel(k), all_views(15), op.p_a(), 15);
  DenseMatrix feat_cov(15, 15);
  for (std::size_t a = 0; a < 15; ++a)
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t j = 0; j < 15; ++j) feat_cov(i, j) += op.p_a()[a] * f(a, i) * f(a, j);
  const auto eig = numkit::sym_eigh(feat_cov);
  const std::size_t d = kp.result().variances.size();
  DenseMatrix nys_proj(d, 15);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t a = 0; a < 15; ++a)
      nys_proj(i, a) = numkit::dot(f.row_span(a), eig.eigenvectors.column_vector(i));
  for (std::size_t i = 1; i <= d; ++i) {
    if (i < d && kp.result().variances[i - 1] - kp.result().variances[i] < 1e-6) continue;
    CHECK(subspace_angle_sin(nys_proj.block(0, 0, i, 15), kp.result().projections.block(0, 0, i, 15),
                             op.p_a()) < 1e-6);
  }
}

TEST_CASE("nystrom: half landmarks on a 10x10 regions task") {
  Rng rng(8, "nys-regions");
  const auto regs = tasklab::random_covering_regions(10, 10, 12, 4, 4, rng);
  const auto op = PosPairOperator::build_exact(tasklab::gen_regions_task(10, 10, regs));
  const DenseMatrix k = op.kernel();
  std::vector<std::size_t> idx(100);
  for (std::size_t i = 0; i < 100; ++i) idx[i] = i;
  for (std::size_t i = 99; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
  std::vector<ViewSample> landmarks;
  for (std::size_t i = 0; i < 50; ++i) landmarks.push_back(ViewSample::enumerated(idx[i]));
  const NystromMap half(matrix_kernel(k), landmarks);
  CHECK(nystrom_relative_error(half, all_views(100), k) <= 0.05);
}

TEST_CASE("decompose and predicted_discrepancy") {
  const auto op = PosPairOperator::build_exact(overlapping_pair_task());
  const auto basis = exact_eigenbasis(op);
  const Vector f2(basis.functions.row_span(1).begin(), basis.functions.row_span(1).end());
  const Vector c = decompose(basis, f2, op.p_a());
  CHECK(std::abs(c[0]) < 1e-12);
  CHECK(std::abs(c[1] - 1.0) < 1e-12);
  CHECK(std::abs(c[2]) < 1e-12);

  const Vector g{1, 0, 0};
  const Vector cg = decompose(basis, g, op.p_a());
  CHECK(std::abs(cg[0] - 0.25) < 1e-12);
  CHECK(std::abs(std::abs(cg[1]) - std::sqrt(2.0) / 4) < 1e-12);
  CHECK(std::abs(cg[2] - 0.25) < 1e-12);
  CHECK(std::abs(predicted_discrepancy(basis, cg) - 0.25) < 1e-12);
  CHECK(std::abs(predicted_discrepancy(basis, cg) - pospair::discrepancy(op, g)) < 1e-12);
  for (std::size_t i = 0; i < 3; ++i) {
    Vector unit(3, 0.0);
    unit[i] = 1.0;
    CHECK(std::abs(predicted_discrepancy(basis, unit) - (2 - 2 * basis.eigenvalues[i])) < 1e-14);
  }
  CHECK(predicted_discrepancy(basis, decompose(basis, Vector{2, 2, 2}, op.p_a())) < 1e-14);

  Rng rng(9, "parseval");
  for (int trial = 0; trial < 10; ++trial) {
    const auto top = PosPairOperator::build_exact(gen_random_task(5, 16, rng));
    const auto b = exact_eigenbasis(top);
    Vector h(16);
    for (double& x : h) x = rng.normal();
    const Vector ch = decompose(b, h, top.p_a());
    CHECK(std::abs(numkit::dot(ch, ch) - weighted_inner(top.p_a(), h, h)) < 1e-10);
    Vector recon(16, 0.0);
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t a = 0; a < 16; ++a) recon[a] += ch[i] * b.functions(i, a);
    for (std::size_t a = 0; a < 16; ++a) CHECK(std::abs(recon[a] - h[a]) < 1e-8);
  }
}

TEST_CASE("alignment_matrix: identity, sign flips, normalization, KPCA rows") {
  const auto op = PosPairOperator::build_exact(overlapping_pair_task());
  const auto basis = exact_eigenbasis(op);
  const DenseMatrix self = alignment_matrix(basis.functions, basis.functions, op.p_a());
  CHECK((self - DenseMatrix::identity(3)).max_abs() < 1e-10);
  DenseMatrix flipped = basis.functions * -1.0;
  CHECK((alignment_matrix(flipped, basis.functions, op.p_a()) - DenseMatrix::identity(3)).max_abs() < 1e-10);
  DenseMatrix scaled = basis.functions * 7.0;
  CHECK((alignment_matrix(scaled, basis.functions, op.p_a()) - DenseMatrix::identity(3)).max_abs() < 1e-10);

  const KernelPca kp(matrix_kernel(op.kernel()), all_views(3), op.p_a(), 2);
  const DenseMatrix al = alignment_matrix(kp.result().projections, basis.functions, op.p_a());
  CHECK((al - DenseMatrix{{1, 0, 0}, {0, 1, 0}}).max_abs() < 1e-10);

  Rng rng(13, "rows");
  DenseMatrix random(4, 3);
  for (double& x : random.data()) x = rng.normal();
  const DenseMatrix ra = alignment_matrix(random, basis.functions, op.p_a());
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) s += ra(i, j);
    CHECK(s <= 1 + 1e-6);
  }
}

TEST_CASE("eigen_groups and group_alignment") {
  const Vector lam{1.0, 0.5, 0.5 - 1e-9, 0.2};
  const auto groups = eigen_groups(lam);
  REQUIRE(groups.size() == 3);
  CHECK(groups[1] == std::pair<std::size_t, std::size_t>{1, 3});
  const DenseMatrix al{{1, 0, 0, 0}, {0, 0.3, 0.6, 0}, {0, 0.5, 0.4, 0}};
  const Vector g = group_alignment(al, lam);
  CHECK(g[0] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(0.9));
  CHECK(g[2] == doctest::Approx(0.9));
}

TEST_CASE("recover_eigenvalue") {
  const FiniteTask t = overlapping_pair_task();
  const auto op = PosPairOperator::build_exact(t);
  const auto basis = exact_eigenbasis(op);
  CHECK(std::abs(recover_eigenvalue(op, basis.functions.row_span(1)) - 0.5) < 1e-12);
  CHECK(std::abs(recover_eigenvalue(op, Vector{4, 4, 4}) - 1.0) < 1e-12);
  Vector scaled(basis.functions.row_span(1).begin(), basis.functions.row_span(1).end());
  for (double& x : scaled) x *= 3.7;
  CHECK(std::abs(recover_eigenvalue(op, scaled) - 0.5) < 1e-12);

  Rng rng(2, "recover-mc");
  const auto f2 = basis.functions;
  const double mc = recover_eigenvalue_mc(
      t, [&](const ViewSample& v) { return f2(1, v.id()); }, 20000, 20000, rng);
  CHECK(std::abs(mc - 0.5) < 0.03);
}

TEST_CASE("Eigen oracle agrees on M for a random task") {
  Rng rng(10, "oracle");
  const auto op = PosPairOperator::build_exact(gen_random_task(7, 25, rng));
  const DenseMatrix m = op.symmetric();
  Eigen::MatrixXd e(25, 25);
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) e(i, j) = m(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(e);
  const auto basis = exact_eigenbasis(op);
  for (int i = 0; i < 25; ++i) CHECK(std::abs(basis.eigenvalues[i] - solver.eigenvalues()(24 - i)) < 1e-12);
}

TEST_CASE("compare_spectrum: the exact kernel reads back as itself") {
  Rng rng(21, "compare");
  const FiniteTask t = gen_random_task(5, 12, rng);
  const auto op = PosPairOperator::build_exact(t);
  // Five latents: K+ has rank five, so only five components come back.
  const SpectrumComparison c = compare_spectrum(op.kernel(), op, 6);
  const auto exact = exact_eigenbasis(op);
  CHECK(c.kernel_error <= 1e-14);
  REQUIRE(c.recovered.size() == 5);
  CHECK(c.group_alignment.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::abs(c.recovered[i] - exact.eigenvalues[i]) <= 1e-8);
    CHECK(c.residuals()[i] <= 1e-8);
    CHECK(c.group_alignment[i] >= 1.0 - 1e-6);
  }
  double total = 0.0;
  for (double l : exact.eigenvalues) total += std::max(l, 0.0);
  CHECK(c.spectrum_sum() == doctest::Approx(total).epsilon(1e-10));

  DenseMatrix doubled = op.kernel();
  doubled *= 2.0;
  CHECK(weighted_kernel_error(doubled, op) == doctest::Approx(1.0).epsilon(1e-12));
}
