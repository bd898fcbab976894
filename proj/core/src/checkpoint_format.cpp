// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "checkpoint_format.hpp"

#include <istream>
#include <ostream>

#include "pairspec/errors.hpp"
#include "pairspec/numkit/matrix_io.hpp"

namespace pairspec::detail {

namespace {
constexpr const char* kFormat = "pairspec-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void write_checkpoint(std::ostream& out, nlohmann::json header, const std::vector<std::string>& names,
                      const std::vector<numkit::DenseMatrix>& tensors) {
  header["format"] = kFormat;
  header["version"] = kVersion;
  nlohmann::json shapes = nlohmann::json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i)
    shapes.push_back({{"name", names.at(i)}, {"rows", tensors[i].rows()}, {"cols", tensors[i].cols()}});
  header["tensors"] = std::move(shapes);
  out << header.dump() << '\n';
  for (const auto& t : tensors) numkit::write_binary(out, t);
  if (!out) throw FormatError("checkpoint: write failed");
}

CheckpointData read_checkpoint(std::istream& in, const std::string& kind) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: missing header line");
  CheckpointData data;
  try {
    data.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (data.header.value("format", "") != kFormat) throw FormatError("checkpoint: not a pairspec checkpoint");
  if (data.header.value("version", 0) != kVersion) throw FormatError("checkpoint: unsupported version");
  if (data.header.value("kind", "") != kind)
    throw FormatError("checkpoint: expected kind '" + kind + "', found '" + data.header.value("kind", "") + "'");
  for (const auto& shape : data.header.at("tensors")) {
    numkit::DenseMatrix t = numkit::read_binary(in);
    if (t.rows() != shape.at("rows").get<std::size_t>() || t.cols() != shape.at("cols").get<std::size_t>())
      throw FormatError("checkpoint: tensor '" + shape.at("name").get<std::string>() + "' shape mismatch");
    data.tensors.push_back(std::move(t));
  }
  return data;
}

}  // namespace pairspec::detail
