// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/numkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pairspec/errors.hpp"

namespace pairspec::numkit {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kSignTol = 1e-12;

// Householder reduction to tridiagonal form. On exit v holds the accumulated
// orthogonal transform, d the diagonal and e the subdiagonal (e[0] unused).
void tridiagonalize(std::size_t n, std::vector<double>& v, Vector& d, Vector& e) {
  auto V = [&](std::size_t i, std::size_t j) -> double& { return v[i * n + j]; };
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e), accumulating rotations into v.
void ql_implicit(std::size_t n, std::vector<double>& v, Vector& d, Vector& e) {
  auto V = [&](std::size_t i, std::size_t j) -> double& { return v[i * n + j]; };
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  const int max_iter = 60;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m == n) m = n - 1;

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_iter) {
          throw ConvergenceError("sym_eigh: implicit QL did not converge", std::abs(e[l]));
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0;
        double s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          const std::size_t i = ii;
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (std::size_t k = 0; k < n; ++k) {
            h = V(k, i + 1);
            V(k, i + 1) = s * V(k, i) + c * h;
            V(k, i) = c * V(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

std::size_t leading_index(const DenseMatrix& v, std::size_t col) {
  for (std::size_t r = 0; r < v.rows(); ++r)
    if (std::abs(v(r, col)) > kSignTol) return r;
  return v.rows();
}

double cutoff_or_default(const EigDecomposition& eig, std::optional<double> cutoff) {
  if (cutoff) return *cutoff;
  const double top = eig.eigenvalues.empty() ? 0.0 : std::max(0.0, eig.eigenvalues.front());
  return 1e-10 * top;
}

void require_psd(const EigDecomposition& eig, const char* who) {
  if (eig.eigenvalues.empty()) return;
  const double scale = std::max(1.0, std::abs(eig.eigenvalues.front()));
  const double lowest = eig.eigenvalues.back();
  if (lowest < -1e-10 * scale) {
    throw NotPsdError(std::string(who) + ": eigenvalue " + std::to_string(lowest) +
                      " is below the PSD tolerance");
  }
}

}  // namespace

EigDecomposition sym_eigh(const DenseMatrix& a) {
  if (!a.is_square()) {
    throw DimensionError("sym_eigh: matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", expected square");
  }
  if (!a.all_finite()) throw NumericError("sym_eigh: non-finite entry");
  const double asym = relative_asymmetry(a);
  if (asym > kSymmetryTol) {
    throw SymmetryError("sym_eigh: relative asymmetry " + std::to_string(asym));
  }
  const std::size_t n = a.rows();
  EigDecomposition out;
  if (n == 0) return out;

  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = 0.5 * (a(i, j) + a(j, i));
  Vector d(n), e(n);
  tridiagonalize(n, v, d, e);
  ql_implicit(n, v, d, e);

  DenseMatrix vecs(n, n, std::move(v));
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t lead = leading_index(vecs, c);
    if (lead < n && vecs(lead, c) < 0)
      for (std::size_t r = 0; r < n; ++r) vecs(r, c) = -vecs(r, c);
  }

  double scale = 1.0;
  for (double x : d) scale = std::max(scale, std::abs(x));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> lead(n);
  for (std::size_t c = 0; c < n; ++c) lead[c] = leading_index(vecs, c);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });
  for (std::size_t g0 = 0; g0 < n;) {
    std::size_t g1 = g0 + 1;
    while (g1 < n && d[order[g1 - 1]] - d[order[g1]] <= kSymmetryTol * scale) ++g1;
    std::stable_sort(order.begin() + g0, order.begin() + g1,
                     [&](std::size_t x, std::size_t y) { return lead[x] < lead[y]; });
    g0 = g1;
  }

  out.eigenvalues.resize(n);
  out.eigenvectors = DenseMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = d[order[k]];
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = vecs(r, order[k]);
  }
  return out;
}

double sym_max_eigenvalue(const DenseMatrix& a) {
  const auto eig = sym_eigh(a);
  if (eig.eigenvalues.empty()) throw DimensionError("sym_max_eigenvalue: empty matrix");
  return eig.eigenvalues.front();
}

DenseMatrix sym_apply(const EigDecomposition& eig, const std::function<double(double)>& f) {
  const std::size_t n = eig.eigenvectors.rows();
  const std::size_t k = eig.eigenvalues.size();
  DenseMatrix scaled = eig.eigenvectors;
  for (std::size_t c = 0; c < k; ++c) {
    const double fc = f(eig.eigenvalues[c]);
    for (std::size_t r = 0; r < n; ++r) scaled(r, c) *= fc;
  }
  return matmul_nt(scaled, eig.eigenvectors);
}

DenseMatrix pinv_sqrt(const DenseMatrix& a, std::optional<double> cutoff) {
  const auto eig = sym_eigh(a);
  require_psd(eig, "pinv_sqrt");
  const double cut = cutoff_or_default(eig, cutoff);
  return sym_apply(eig, [cut](double lam) { return lam > cut ? 1.0 / std::sqrt(lam) : 0.0; });
}

DenseMatrix pinv_psd(const DenseMatrix& a, std::optional<double> cutoff) {
  const auto eig = sym_eigh(a);
  require_psd(eig, "pinv_psd");
  const double cut = cutoff_or_default(eig, cutoff);
  return sym_apply(eig, [cut](double lam) { return lam > cut ? 1.0 / lam : 0.0; });
}

DenseMatrix cholesky(const DenseMatrix& a) {
  if (!a.is_square()) throw DimensionError("cholesky: matrix not square");
  const std::size_t n = a.rows();
  double diag_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_scale = std::max(diag_scale, std::abs(a(i, i)));
  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = a(j, j);
    for (std::size_t k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
    if (!(s > 1e-14 * std::max(diag_scale, 1e-300))) {
      throw SingularityError("cholesky: pivot " + std::to_string(j) + " is not positive (" +
                             std::to_string(s) + ")");
    }
    const double ljj = std::sqrt(s);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = a(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= l(i, k) * l(j, k);
      l(i, j) = t / ljj;
    }
  }
  return l;
}

DenseMatrix solve_spd(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("solve_spd: right-hand side row mismatch");
  const DenseMatrix l = cholesky(a);
  const std::size_t n = a.rows();
  DenseMatrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
      x(ii, c) = s / l(ii, ii);
    }
  }
  return x;
}

}  // namespace pairspec::numkit
