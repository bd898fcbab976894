// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "manifest.hpp"

namespace pairspec::cli {

/// A numeric or runtime failure inside a named stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineOptions {
  std::filesystem::path out;
  std::size_t threads = 1;
  /// Model checkpoint for kpca/align/downstream when train did not run here.
  std::optional<std::filesystem::path> checkpoint;
};

/// Runs stages against one config and output directory, then writes
/// config.json, report.json and manifest.json.
class Pipeline {
 public:
  Pipeline(ExperimentConfig config, PipelineOptions options);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Throws ConfigError for configuration problems, StageError for anything else.
  void run_stage(const std::string& name);
  void finish();

 private:
  struct State;
  std::unique_ptr<State> s_;
};

}  // namespace pairspec::cli
