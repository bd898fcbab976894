// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "pairspec/numkit/dense_matrix.hpp"

namespace pairspec::numkit {

/// Shortest decimal that round-trips to the same float64. Integral values keep
/// a trailing ".0" so a column of reals never reads back as integers.
std::string format_real(double x);

/// One row per line, comma separated, shortest round-trip decimals.
void write_csv(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_csv(std::istream& in);

/// "PSPEC1" magic, uint64 rows, uint64 cols (little endian), float64 payload.
void write_binary(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_binary(std::istream& in);

void save_csv(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix load_csv(const std::filesystem::path& path);
void save_binary(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix load_binary(const std::filesystem::path& path);

}  // namespace pairspec::numkit
