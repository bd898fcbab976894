// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>

#include "json.hpp"
#include "pairspec/errors.hpp"

namespace pairspec::cli {

using nlohmann::json;

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("manifest: cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("manifest: SHA-256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

void write_manifest(const std::filesystem::path& dir, std::vector<ManifestEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  json files = json::array();
  for (auto& e : entries) {
    const auto full = dir / e.path;
    e.sha256 = sha256_file(full);
    e.bytes = std::filesystem::file_size(full);
    json f = {{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}};
    if (!e.columns.empty()) f["columns"] = e.columns;
    files.push_back(std::move(f));
  }
  const json manifest = {{"format", "pairspec-manifest"}, {"version", 1}, {"files", files}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw FormatError("manifest: cannot write into '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
}

namespace {

json parse_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("manifest: no manifest.json in '" + dir.string() + "'");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest: unreadable: ") + e.what());
  }
  if (!manifest.is_object() || manifest.value("format", "") != "pairspec-manifest" || !manifest.contains("files"))
    throw FormatError("manifest: '" + (dir / "manifest.json").string() + "' is not a pairspec manifest");
  return manifest;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json")) return {};
  const json manifest = parse_manifest(dir);
  std::vector<ManifestEntry> out;
  for (const auto& f : manifest.at("files")) {
    ManifestEntry e{f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                    f.at("bytes").get<std::uintmax_t>(), {}};
    if (f.contains("columns")) e.columns = f.at("columns").get<std::vector<std::string>>();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::string> stale_files(const std::filesystem::path& dir) {
  const json manifest = parse_manifest(dir);
  std::vector<std::string> stale;
  for (const auto& f : manifest.at("files")) {
    const std::string path = f.at("path").get<std::string>();
    const auto full = dir / path;
    if (!std::filesystem::exists(full) || sha256_file(full) != f.at("sha256").get<std::string>()) stale.push_back(path);
  }
  return stale;
}

}  // namespace pairspec::cli
