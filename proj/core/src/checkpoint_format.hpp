// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pairspec/numkit/dense_matrix.hpp"

namespace pairspec::detail {

// Header line with "format", "kind" and a "tensors" shape list, then one
// binary matrix container per tensor.
void write_checkpoint(std::ostream& out, nlohmann::json header, const std::vector<std::string>& names,
                      const std::vector<numkit::DenseMatrix>& tensors);

struct CheckpointData {
  nlohmann::json header;
  std::vector<numkit::DenseMatrix> tensors;
};
CheckpointData read_checkpoint(std::istream& in, const std::string& kind);

}  // namespace pairspec::detail
