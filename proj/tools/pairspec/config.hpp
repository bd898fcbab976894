// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pairspec/analysis/analysis.hpp"
#include "pairspec/contrastive/train.hpp"
#include "pairspec/neuralef/neuralef.hpp"
#include "pairspec/tasklab/generators.hpp"

namespace pairspec::cli {

struct TaskConfig {
  std::string kind = "overlapping_pair";  // overlapping_pair | regions | random | sprites | file
  // regions
  std::size_t grid_w = 10, grid_h = 10;
  std::string layout = "random";  // random | tiled | explicit
  std::size_t count = 12;
  int width = 4, height = 4;
  int tile = 4, stride = 2;
  std::vector<tasklab::Rect> rects;
  // random
  std::size_t latents = 6, views = 12;
  double density = 0.3;
  // sprites
  tasklab::SpriteParams sprites;
  // file
  std::string path;
};

struct ModelConfig {
  contrastive::ModelSpec spec;
  std::optional<contrastive::Encoding> encoding;  // empty: automatic
};

struct SpectraConfig {
  std::size_t top = 8;
  double landmark_fraction = 0.5;
  std::size_t samples_per_latent = 8;
};

struct ChainConfig {
  std::size_t start = 0;
  std::size_t steps = 20;
  std::size_t functions = 3;
};

struct DownstreamConfig {
  std::string representation = "exact";  // exact | kpca | neuralef
  std::size_t train = 500, val = 200, test = 1000;
  std::vector<double> l2 = {0.0, 1e-4, 1e-2, 1.0};
  std::vector<std::size_t> dims;  // empty: 1..top
};

struct AnalysisConfig {
  double eps = 1.0;
  std::size_t challengers = 1000;
  std::vector<std::size_t> dims;  // empty: every d from 1 to |A| - 1
  std::size_t assumption_trials = 1000;
  std::size_t perturbations = 100;
  std::vector<analysis::BoundSpec> bounds;
  ChainConfig chain;
  DownstreamConfig downstream;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out = "out";
  TaskConfig task;
  ModelConfig model;
  contrastive::LossSpec loss;
  contrastive::TrainConfig train;
  neuralef::NefConfig neuralef;
  std::optional<contrastive::Encoding> neuralef_encoding;
  SpectraConfig spectra;
  AnalysisConfig analysis;
  std::vector<std::string> stages = {"task", "exact", "train", "kpca", "align"};
};

/// Every stage name `run` accepts, in execution order.
const std::vector<std::string>& stage_order();

/// Throws ConfigError naming the offending field ("config.train.batch: ...").
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form; parse_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& c);

tasklab::FiniteTask build_task(const TaskConfig& c, std::uint64_t seed);

}  // namespace pairspec::cli
