// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>

#include "pairspec/numkit/dense_matrix.hpp"

namespace pairspec::numkit {

struct EigDecomposition {
  Vector eigenvalues;       // descending
  DenseMatrix eigenvectors;  // column i pairs with eigenvalues[i]
};

/// Symmetric eigendecomposition via Householder tridiagonalization and
/// implicit QL. Eigenvalues descend; each eigenvector is sign-normalized so
/// its first component with magnitude above 1e-12 is positive, and exact ties
/// are ordered by the index of that component.
EigDecomposition sym_eigh(const DenseMatrix& a);

/// Largest eigenvalue of a symmetric matrix (full decomposition; n is small).
double sym_max_eigenvalue(const DenseMatrix& a);

/// V f(Λ) V^T for the spectral function f.
DenseMatrix sym_apply(const EigDecomposition& eig, const std::function<double(double)>& f);

/// Returns B = pseudo-inverse square root of a symmetric PSD matrix. Eigenvalues
/// at or below `cutoff` are zeroed. When `cutoff` is omitted it defaults to
/// 1e-10 times the largest eigenvalue. Throws NotPsdError for eigenvalues below
/// -1e-10 * max(1, |λ_max|).
DenseMatrix pinv_sqrt(const DenseMatrix& a, std::optional<double> cutoff = std::nullopt);

/// Pseudo-inverse of a symmetric PSD matrix with the same cutoff rule.
DenseMatrix pinv_psd(const DenseMatrix& a, std::optional<double> cutoff = std::nullopt);

/// Lower-triangular Cholesky factor. Throws SingularityError when a pivot is
/// not positive relative to the diagonal scale.
DenseMatrix cholesky(const DenseMatrix& a);

/// Solves A X = B for symmetric positive-definite A.
DenseMatrix solve_spd(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace pairspec::numkit
