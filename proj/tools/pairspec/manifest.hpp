// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pairspec::cli {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
  std::vector<std::string> columns;  // CSV column names; empty for other files
};

/// Hashes every entry and writes manifest.json into `dir`, sorted by path.
void write_manifest(const std::filesystem::path& dir, std::vector<ManifestEntry> entries);

/// Entries of an existing manifest.json in `dir`; empty when there is none.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);

/// Paths whose current hash differs from manifest.json (missing files included).
std::vector<std::string> stale_files(const std::filesystem::path& dir);

}  // namespace pairspec::cli
