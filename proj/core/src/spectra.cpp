// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/spectra/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pairspec/errors.hpp"
#include "pairspec/numkit/linalg.hpp"

namespace pairspec::spectra {

namespace {

constexpr double kSymmetryTol = 1e-8;

}  // namespace

void normalize_signs(DenseMatrix& rows) {
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto r = rows.row_span(i);
    double best = 0.0;
    for (double x : r) best = std::max(best, std::abs(x));
    if (best == 0.0) continue;
    for (double x : r) {
      if (std::abs(x) >= best * (1.0 - 1e-12)) {
        if (x < 0)
          for (double& y : r) y = -y;
        break;
      }
    }
  }
}

EigenBasis exact_eigenbasis(const PosPairOperator& op) {
  const auto eig = numkit::sym_eigh(op.symmetric());
  const std::size_t n = op.view_count();
  EigenBasis basis;
  // M is PSD with spectral radius 1; round-off outside [0, 1] or next to an
  // invariant eigenvalue is removed.
  const double snap = 64.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  basis.eigenvalues = eig.eigenvalues;
  for (double& l : basis.eigenvalues) l = l >= 1.0 - snap ? 1.0 : std::max(l, 0.0);
  basis.functions = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < n; ++a)
      basis.functions(i, a) = eig.eigenvectors(a, i) / std::sqrt(op.p_a()[a]);
  normalize_signs(basis.functions);
  return basis;
}

PcaResult population_kpca(const PosPairOperator& op) {
  const DenseMatrix phi = op.feature_matrix();  // |Z| x |A|
  const DenseMatrix weighted = numkit::scale_rows_cols(phi, Vector(phi.rows(), 1.0), op.p_a());
  DenseMatrix cov = numkit::matmul_nt(weighted, phi);
  for (std::size_t i = 0; i < cov.rows(); ++i)
    for (std::size_t j = i + 1; j < cov.cols(); ++j) cov(i, j) = cov(j, i);
  const auto eig = numkit::sym_eigh(cov);

  const std::size_t n = op.view_count();
  PcaResult out;
  out.spectrum = eig.eigenvalues;
  out.projections = DenseMatrix(n, n);
  out.variances.assign(n, 0.0);
  const std::size_t kept = std::min(n, eig.eigenvalues.size());
  for (std::size_t i = 0; i < kept; ++i) {
    out.variances[i] = std::max(0.0, eig.eigenvalues[i]);
    const Vector u = eig.eigenvectors.column_vector(i);
    const Vector h = numkit::matvec_t(phi, u);
    std::copy(h.begin(), h.end(), out.projections.row_span(i).begin());
  }
  normalize_signs(out.projections);
  return out;
}

PcaResult kpca_from_gram(const DenseMatrix& gram, std::span<const double> weights, std::size_t top) {
  if (!gram.is_square() || gram.rows() != weights.size())
    throw DimensionError("kpca: Gram and weights disagree in size");
  const double asym = numkit::relative_asymmetry(gram);
  if (asym > kSymmetryTol) throw SymmetryError("kpca: Gram asymmetry " + std::to_string(asym));
  Vector sw(weights.size());
  for (std::size_t i = 0; i < sw.size(); ++i) {
    if (!(weights[i] > 0.0)) throw DimensionError("kpca: weights must be positive");
    sw[i] = std::sqrt(weights[i]);
  }
  DenseMatrix op = numkit::scale_rows_cols(gram, sw, sw);
  for (std::size_t i = 0; i < op.rows(); ++i)
    for (std::size_t j = i + 1; j < op.cols(); ++j) op(i, j) = op(j, i) = 0.5 * (op(i, j) + op(j, i));
  const auto eig = numkit::sym_eigh(op);

  PcaResult out;
  out.spectrum = eig.eigenvalues;
  const double scale = gram.frobenius_norm();
  out.not_psd_warning = !eig.eigenvalues.empty() && eig.eigenvalues.back() < -1e-6 * scale;
  double mu_scale = 0.0;
  for (double mu : eig.eigenvalues) mu_scale = std::max(mu_scale, std::abs(mu));
  const double positive = 1e-10 * mu_scale;
  std::size_t kept = 0;
  while (kept < std::min(top, eig.eigenvalues.size()) && eig.eigenvalues[kept] > positive) ++kept;
  out.projections = DenseMatrix(kept, gram.rows());
  out.variances.resize(kept);
  for (std::size_t i = 0; i < kept; ++i) {
    const double mu = eig.eigenvalues[i];
    out.variances[i] = mu;
    for (std::size_t j = 0; j < gram.rows(); ++j)
      out.projections(i, j) = std::sqrt(mu) * eig.eigenvectors(j, i) / sw[j];
  }
  normalize_signs(out.projections);
  return out;
}

KernelPca::KernelPca(KernelFn kernel, std::vector<ViewSample> support, Vector weights, std::size_t top)
    : kernel_(std::move(kernel)), support_(std::move(support)) {
  const std::size_t n = support_.size();
  if (weights.size() != n) throw DimensionError("KernelPca: weight count mismatch");
  DenseMatrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) gram(i, j) = gram(j, i) = kernel_(support_[i], support_[j]);
  result_ = kpca_from_gram(gram, weights, top);
  sqrt_w_.resize(n);
  for (std::size_t i = 0; i < n; ++i) sqrt_w_[i] = std::sqrt(weights[i]);
  // v_ij recovered from the signed projections: v_ij = h_i(a_j) sqrt(w_j) / sqrt(mu_i).
  vectors_ = DenseMatrix(n, result_.variances.size());
  for (std::size_t i = 0; i < result_.variances.size(); ++i)
    for (std::size_t j = 0; j < n; ++j)
      vectors_(j, i) = result_.projections(i, j) * sqrt_w_[j] / std::sqrt(result_.variances[i]);
}

Vector KernelPca::project(const ViewSample& a) const {
  Vector k(support_.size());
  for (std::size_t j = 0; j < support_.size(); ++j) k[j] = sqrt_w_[j] * kernel_(a, support_[j]);
  Vector h = numkit::matvec_t(vectors_, k);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] /= std::sqrt(result_.variances[i]);
  return h;
}

NystromMap::NystromMap(KernelFn kernel, std::vector<ViewSample> landmarks, std::optional<double> cutoff)
    : kernel_(std::move(kernel)), landmarks_(std::move(landmarks)) {
  for (std::size_t i = 0; i < landmarks_.size(); ++i)
    for (std::size_t j = i + 1; j < landmarks_.size(); ++j)
      if (landmarks_[i] == landmarks_[j]) throw DimensionError("NystromMap: duplicate landmark");
  const std::size_t m = landmarks_.size();
  DenseMatrix kss(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) kss(i, j) = kss(j, i) = kernel_(landmarks_[i], landmarks_[j]);
  whitening_ = numkit::pinv_sqrt(kss, cutoff);
}

Vector NystromMap::features(const ViewSample& a) const {
  Vector k(landmarks_.size());
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = kernel_(landmarks_[i], a);
  return numkit::matvec(whitening_, k);
}

DenseMatrix NystromMap::feature_rows(const std::vector<ViewSample>& views) const {
  DenseMatrix out(views.size(), dim());
  for (std::size_t r = 0; r < views.size(); ++r) {
    const Vector f = features(views[r]);
    std::copy(f.begin(), f.end(), out.row_span(r).begin());
  }
  return out;
}

double nystrom_relative_error(const NystromMap& map, const std::vector<ViewSample>& views,
                              const DenseMatrix& exact) {
  if (exact.rows() != views.size() || !exact.is_square())
    throw DimensionError("nystrom_relative_error: reference Gram size mismatch");
  const DenseMatrix f = map.feature_rows(views);
  const DenseMatrix approx = numkit::matmul_nt(f, f);
  double total = 0.0;
  for (std::size_t a = 0; a < views.size(); ++a) {
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < views.size(); ++b) {
      num += std::pow(approx(a, b) - exact(a, b), 2);
      den += std::pow(exact(a, b), 2);
    }
    total += den > 0 ? std::sqrt(num / den) : std::sqrt(num);
  }
  return total / static_cast<double>(views.size());
}

Vector decompose(const EigenBasis& basis, std::span<const double> g, std::span<const double> p_a) {
  if (g.size() != basis.functions.cols() || p_a.size() != g.size())
    throw DimensionError("decompose: length mismatch");
  Vector c(basis.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = numkit::weighted_dot(p_a, basis.functions.row_span(i), g);
  return c;
}

double predicted_discrepancy(const EigenBasis& basis, std::span<const double> c) {
  if (c.size() != basis.size()) throw DimensionError("predicted_discrepancy: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += (2.0 - 2.0 * basis.eigenvalues[i]) * c[i] * c[i];
  return s;
}

DenseMatrix alignment_matrix(const DenseMatrix& first, const DenseMatrix& second,
                             std::span<const double> weights) {
  if (first.cols() != weights.size() || second.cols() != weights.size())
    throw DimensionError("alignment_matrix: function length mismatch");
  auto normalized = [&](const DenseMatrix& m) {
    DenseMatrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double n = std::sqrt(numkit::weighted_dot(weights, m.row_span(i), m.row_span(i)));
      for (double& x : out.row_span(i)) x = n > 0 ? x / n : 0.0;
    }
    return out;
  };
  const DenseMatrix a = normalized(first);
  const DenseMatrix b = normalized(second);
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double c = numkit::weighted_dot(weights, a.row_span(i), b.row_span(j));
      out(i, j) = c * c;
    }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> eigen_groups(std::span<const double> eigenvalues,
                                                              double tol) {
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < eigenvalues.size();) {
    std::size_t j = i + 1;
    while (j < eigenvalues.size() && std::abs(eigenvalues[j - 1] - eigenvalues[j]) < tol) ++j;
    groups.emplace_back(i, j);
    i = j;
  }
  return groups;
}

Vector group_alignment(const DenseMatrix& alignment, std::span<const double> exact_eigenvalues,
                       double tol) {
  if (alignment.cols() != exact_eigenvalues.size())
    throw DimensionError("group_alignment: alignment columns must match exact eigenvalues");
  const auto groups = eigen_groups(exact_eigenvalues, tol);
  Vector out(alignment.rows(), 0.0);
  for (std::size_t j = 0; j < alignment.rows(); ++j) {
    if (j >= exact_eigenvalues.size()) break;
    for (const auto& [b, e] : groups) {
      if (j < b || j >= e) continue;
      for (std::size_t i = b; i < e; ++i) out[j] += alignment(j, i);
    }
  }
  return out;
}

double recover_eigenvalue(const PosPairOperator& op, std::span<const double> f) {
  const double norm2 = numkit::weighted_dot(op.p_a(), f, f);
  if (!(norm2 > 0.0)) throw NumericError("recover_eigenvalue: function has zero norm");
  return 1.0 - pospair::discrepancy(op, f) / norm2 / 2.0;
}

double recover_eigenvalue_mc(const FiniteTask& task, const std::function<double(const ViewSample&)>& f,
                             std::size_t norm_samples, std::size_t pairs, Rng& rng) {
  double norm2 = 0.0;
  for (std::size_t i = 0; i < norm_samples; ++i) {
    const double v = f(tasklab::sample_marginal_view(task, rng));
    norm2 += v * v;
  }
  norm2 /= static_cast<double>(norm_samples);
  if (!(norm2 > 0.0)) throw NumericError("recover_eigenvalue_mc: function has zero norm");
  const auto est = pospair::discrepancy_mc(task, f, pairs, rng);
  return 1.0 - est.mean / norm2 / 2.0;
}

double subspace_angle_sin(const DenseMatrix& a, const DenseMatrix& b, std::span<const double> weights) {
  const DenseMatrix qa = numkit::weighted_orthonormalize(a.transpose(), weights);
  const DenseMatrix qb = numkit::weighted_orthonormalize(b.transpose(), weights);
  if (qa.cols() != qb.cols()) return 1.0;
  if (qa.cols() == 0) return 0.0;
  const DenseMatrix wqb = numkit::scale_rows_cols(qb, weights, Vector(qb.cols(), 1.0));
  const DenseMatrix c = numkit::matmul_tn(qa, wqb);
  DenseMatrix ctc = numkit::matmul_tn(c, c);
  for (std::size_t i = 0; i < ctc.rows(); ++i)
    for (std::size_t j = i + 1; j < ctc.cols(); ++j) ctc(i, j) = ctc(j, i);
  const auto eig = numkit::sym_eigh(ctc);
  const double cos2 = std::clamp(eig.eigenvalues.back(), 0.0, 1.0);
  return std::sqrt(1.0 - cos2);
}

double weighted_kernel_error(const DenseMatrix& k_hat, const PosPairOperator& op) {
  const DenseMatrix k = op.kernel();
  if (k_hat.rows() != k.rows() || k_hat.cols() != k.cols()) throw DimensionError("weighted_kernel_error: shape mismatch");
  const auto& p = op.p_a();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double w = p[i] * p[j], e = k_hat(i, j) - k(i, j);
      num += w * e * e;
      den += w * k(i, j) * k(i, j);
    }
  return std::sqrt(num / den);
}

Vector SpectrumComparison::residuals() const {
  Vector r(discrepancy.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::abs(discrepancy[i] - (2.0 - 2.0 * pca.variances[i]));
  return r;
}

double SpectrumComparison::spectrum_sum() const {
  double s = 0.0;
  for (double v : pca.spectrum) s += std::max(v, 0.0);
  return s;
}

SpectrumComparison compare_spectrum(const DenseMatrix& gram, const PosPairOperator& op, std::size_t top) {
  SpectrumComparison out;
  out.pca = kpca_from_gram(gram, op.p_a(), top);
  const std::size_t k = out.pca.projections.rows();
  out.functions = out.pca.projections;
  out.discrepancy.assign(k, std::numeric_limits<double>::quiet_NaN());
  out.recovered = out.discrepancy;
  for (std::size_t i = 0; i < k; ++i) {
    auto row = out.functions.row_span(i);
    const double norm2 = numkit::weighted_dot(op.p_a(), row, row);
    if (!(norm2 > 0.0)) continue;
    const double s = 1.0 / std::sqrt(norm2);
    for (double& x : row) x *= s;
    out.discrepancy[i] = pospair::discrepancy(op, row);
    out.recovered[i] = 1.0 - out.discrepancy[i] / 2.0;
  }
  const EigenBasis exact = exact_eigenbasis(op);
  out.alignment = alignment_matrix(out.functions, exact.functions, op.p_a());
  out.group_alignment = group_alignment(out.alignment, exact.eigenvalues);
  out.kernel_error = weighted_kernel_error(gram, op);
  return out;
}

std::vector<ViewSample> all_views(std::size_t n) {
  std::vector<ViewSample> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.push_back(ViewSample::enumerated(i));
  return v;
}

}  // namespace pairspec::spectra
