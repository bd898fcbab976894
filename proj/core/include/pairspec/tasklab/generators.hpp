// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "pairspec/tasklab/task.hpp"

namespace pairspec::tasklab {

/// Latents are the rectangles (uniform prior); p(a|z) is uniform over the
/// grid points inside rectangle z. Views are grid points, id = y * grid_w + x.
/// Throws CoverageError when a rectangle is empty or a grid point is uncovered.
FiniteTask gen_regions_task(std::size_t grid_w, std::size_t grid_h, const std::vector<Rect>& regions,
                            Rng& rng);
FiniteTask gen_regions_task(std::size_t grid_w, std::size_t grid_h, const std::vector<Rect>& regions);

/// 1x3 grid with regions {a1, a2} and {a2, a3}.
FiniteTask overlapping_pair_task();

/// `count` rectangles of size w x h placed so that the grid is covered: each
/// new rectangle is anchored at the first uncovered point (clamped into the
/// grid) until coverage is complete, then the rest are placed at random.
std::vector<Rect> random_covering_regions(std::size_t grid_w, std::size_t grid_h, std::size_t count,
                                          int width, int height, Rng& rng);

/// Square tiles of side `tile` at every multiple of `stride` that fits.
std::vector<Rect> tiled_regions(std::size_t grid_side, int tile, int stride);

/// Random enumerated task: each latent covers a random subset of views with
/// random positive weights; a chain of overlaps keeps the task connected.
FiniteTask gen_random_task(std::size_t latent_count, std::size_t view_count, Rng& rng,
                           double density = 0.3);

struct SpriteParams {
  std::size_t grid = 8;
  std::size_t class_count = 3;
  std::size_t sprites_per_class = 10;
  std::size_t copies = 4;
  std::size_t k = 10;
  int jitter = 1;                // max integer shift per copy
  double blur = 0.6;             // gaussian blur width in cells
  std::size_t strokes = 3;       // strokes per class prototype
  double stroke_wobble = 0.08;   // per-sprite endpoint noise, fraction of grid
  double floor_mass = 1e-4;      // uniform mass mixed in before normalization
};

/// Procedural multinomial-pixel task. Each class has a stroke prototype; each
/// sprite perturbs it; each copy of a sprite is shifted and blurred.
FiniteTask gen_sprite_task(const SpriteParams& params, Rng& rng);

/// Versioned JSON serialization.
std::string task_to_json(const FiniteTask& task);
FiniteTask task_from_json(const std::string& text);

}  // namespace pairspec::tasklab
