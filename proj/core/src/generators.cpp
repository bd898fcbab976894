// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/tasklab/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pairspec/errors.hpp"

namespace pairspec::tasklab {

namespace {

using nlohmann::json;

constexpr int kTaskSchemaVersion = 1;

bool contains(const Rect& r, std::size_t x, std::size_t y) {
  const auto xi = static_cast<int>(x);
  const auto yi = static_cast<int>(y);
  return xi >= r.x0 && xi < r.x0 + r.width && yi >= r.y0 && yi < r.y0 + r.height;
}

void normalize(Vector& v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= s;
}

}  // namespace

FiniteTask gen_regions_task(std::size_t grid_w, std::size_t grid_h, const std::vector<Rect>& regions,
                            Rng& /*rng*/) {
  return gen_regions_task(grid_w, grid_h, regions);
}

FiniteTask gen_regions_task(std::size_t grid_w, std::size_t grid_h, const std::vector<Rect>& regions) {
  if (grid_w == 0 || grid_h == 0) throw DimensionError("regions task: empty grid");
  if (regions.empty()) throw CoverageError("regions task: no regions");
  const std::size_t n = grid_w * grid_h;
  DenseMatrix cond(regions.size(), n);
  std::vector<bool> covered(n, false);
  for (std::size_t z = 0; z < regions.size(); ++z) {
    std::size_t inside = 0;
    for (std::size_t y = 0; y < grid_h; ++y)
      for (std::size_t x = 0; x < grid_w; ++x)
        if (contains(regions[z], x, y)) {
          cond(z, y * grid_w + x) = 1.0;
          covered[y * grid_w + x] = true;
          ++inside;
        }
    if (inside == 0) throw CoverageError("regions task: region " + std::to_string(z) + " is empty");
    for (double& v : cond.row_span(z)) v /= static_cast<double>(inside);
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (!covered[a]) {
      throw CoverageError("regions task: grid point (" + std::to_string(a % grid_w) + ", " +
                          std::to_string(a / grid_w) + ") is not covered by any region");
    }
  }
  Vector p_z(regions.size(), 1.0 / static_cast<double>(regions.size()));
  FiniteTask t = FiniteTask::enumerated(std::move(p_z), std::move(cond));
  t.set_grid(grid_w, grid_h, regions);
  return t;
}

FiniteTask overlapping_pair_task() { return gen_regions_task(3, 1, {{0, 0, 2, 1}, {1, 0, 2, 1}}); }

std::vector<Rect> random_covering_regions(std::size_t grid_w, std::size_t grid_h, std::size_t count,
                                          int width, int height, Rng& rng) {
  const int gw = static_cast<int>(grid_w);
  const int gh = static_cast<int>(grid_h);
  if (width > gw || height > gh) throw DimensionError("region larger than grid");
  std::vector<Rect> out;
  std::vector<bool> covered(grid_w * grid_h, false);
  auto mark = [&](const Rect& r) {
    for (std::size_t y = 0; y < grid_h; ++y)
      for (std::size_t x = 0; x < grid_w; ++x)
        if (contains(r, x, y)) covered[y * grid_w + x] = true;
  };
  while (out.size() < count) {
    const auto hole = std::find(covered.begin(), covered.end(), false);
    Rect r{0, 0, width, height};
    if (hole != covered.end()) {
      const int idx = static_cast<int>(hole - covered.begin());
      r.x0 = std::min(idx % gw, gw - width);
      r.y0 = std::min(idx / gw, gh - height);
    } else {
      r.x0 = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(gw - width + 1)));
      r.y0 = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(gh - height + 1)));
    }
    mark(r);
    out.push_back(r);
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end())
    throw CoverageError("random_covering_regions: too few regions to cover the grid");
  return out;
}

std::vector<Rect> tiled_regions(std::size_t grid_side, int tile, int stride) {
  std::vector<Rect> out;
  const int g = static_cast<int>(grid_side);
  for (int y = 0; y + tile <= g; y += stride)
    for (int x = 0; x + tile <= g; x += stride) out.push_back({x, y, tile, tile});
  return out;
}

FiniteTask gen_random_task(std::size_t latent_count, std::size_t view_count, Rng& rng,
                           double density) {
  if (latent_count == 0 || view_count == 0) throw DimensionError("random task: empty");
  DenseMatrix cond(latent_count, view_count);
  for (std::size_t z = 0; z < latent_count; ++z)
    for (std::size_t a = 0; a < view_count; ++a)
      if (rng.uniform() < density) cond(z, a) = 0.1 + rng.uniform();
  // Contiguous blocks stepping by one view give every view a latent and link
  // consecutive latents, so the chain has a single communicating class.
  for (std::size_t a = 0; a < view_count; ++a) {
    const std::size_t z = a * latent_count / view_count;
    if (cond(z, a) == 0.0) cond(z, a) = 0.1 + rng.uniform();
    if (z + 1 < latent_count && (a + 1) * latent_count / view_count > z && cond(z + 1, a) == 0.0)
      cond(z + 1, a) = 0.1 + rng.uniform();
  }
  for (std::size_t z = 0; z < latent_count; ++z) {
    auto row = cond.row_span(z);
    double s = std::accumulate(row.begin(), row.end(), 0.0);
    if (s == 0.0) {
      row[rng.uniform_int(view_count)] = 1.0;
      s = 1.0;
    }
    for (double& v : row) v /= s;
  }
  Vector p_z(latent_count);
  for (double& p : p_z) p = 0.2 + rng.uniform();
  normalize(p_z);
  return FiniteTask::enumerated(std::move(p_z), std::move(cond));
}

namespace {

struct Stroke {
  double x0, y0, x1, y1;
};

Vector render_strokes(const std::vector<Stroke>& strokes, std::size_t grid, double dx, double dy,
                      double blur) {
  Vector img(grid * grid, 0.0);
  const double g = static_cast<double>(grid);
  const double width = std::max(0.35, blur);
  for (const auto& s : strokes) {
    for (std::size_t cy = 0; cy < grid; ++cy)
      for (std::size_t cx = 0; cx < grid; ++cx) {
        const double px = (static_cast<double>(cx) + 0.5) / g - dx / g;
        const double py = (static_cast<double>(cy) + 0.5) / g - dy / g;
        const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
        const double len2 = vx * vx + vy * vy;
        double t = len2 > 0 ? ((px - s.x0) * vx + (py - s.y0) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = (px - (s.x0 + t * vx)) * g, ey = (py - (s.y0 + t * vy)) * g;
        img[cy * grid + cx] += std::exp(-(ex * ex + ey * ey) / (2.0 * width * width));
      }
  }
  return img;
}

}  // namespace

FiniteTask gen_sprite_task(const SpriteParams& params, Rng& rng) {
  if (params.k < 1) throw DimensionError("sprite task: k must be at least 1");
  if (params.grid < 4) throw DimensionError("sprite task: grid must be at least 4");
  if (params.class_count == 0 || params.sprites_per_class == 0 || params.copies == 0)
    throw DimensionError("sprite task: class, sprite and copy counts must be positive");
  const std::size_t cells = params.grid * params.grid;

  Rng proto_rng = rng.split("prototypes");
  std::vector<std::vector<Stroke>> prototypes(params.class_count);
  for (auto& proto : prototypes) {
    for (std::size_t s = 0; s < std::max<std::size_t>(1, params.strokes); ++s) {
      proto.push_back({proto_rng.uniform(0.2, 0.8), proto_rng.uniform(0.2, 0.8),
                       proto_rng.uniform(0.2, 0.8), proto_rng.uniform(0.2, 0.8)});
    }
  }

  Rng sprite_rng = rng.split("sprites");
  std::vector<std::vector<Vector>> intensities;
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < params.class_count; ++c) {
    for (std::size_t i = 0; i < params.sprites_per_class; ++i) {
      std::vector<Stroke> strokes = prototypes[c];
      for (auto& s : strokes) {
        s.x0 += params.stroke_wobble * sprite_rng.normal();
        s.y0 += params.stroke_wobble * sprite_rng.normal();
        s.x1 += params.stroke_wobble * sprite_rng.normal();
        s.y1 += params.stroke_wobble * sprite_rng.normal();
      }
      std::vector<Vector> copies;
      for (std::size_t k = 0; k < params.copies; ++k) {
        const int span = 2 * params.jitter + 1;
        const double dx = static_cast<double>(static_cast<int>(sprite_rng.uniform_int(span)) - params.jitter);
        const double dy = static_cast<double>(static_cast<int>(sprite_rng.uniform_int(span)) - params.jitter);
        const double blur = params.blur * (0.75 + 0.5 * sprite_rng.uniform());
        Vector img = render_strokes(strokes, params.grid, dx, dy, blur);
        const double mass = std::accumulate(img.begin(), img.end(), 0.0);
        if (!(mass > 0.0) || !std::isfinite(mass))
          throw NumericError("sprite task: generated an all-zero sprite");
        for (double& v : img) v = v / mass + params.floor_mass / static_cast<double>(cells);
        normalize(img);
        copies.push_back(std::move(img));
      }
      intensities.push_back(std::move(copies));
      labels.push_back(c);
    }
  }
  const std::size_t latents = intensities.size();
  Vector p_z(latents, 1.0 / static_cast<double>(latents));
  return FiniteTask::multiset(params.grid, params.k, std::move(p_z), std::move(intensities),
                              std::move(labels));
}

std::string task_to_json(const FiniteTask& task) {
  json j;
  j["schema_version"] = kTaskSchemaVersion;
  j["latent_count"] = task.latent_count();
  j["p_z"] = task.p_z();
  if (task.labels()) j["labels"] = *task.labels();
  if (task.is_enumerated()) {
    j["view_space"] = {{"kind", "enumerated"}, {"view_count", task.view_count()}};
    json rows = json::array();
    for (std::size_t z = 0; z < task.latent_count(); ++z) {
      const auto r = task.cond().row_span(z);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["cond"] = rows;
    if (task.has_grid()) {
      json regs = json::array();
      for (const auto& r : task.regions()) regs.push_back({r.x0, r.y0, r.width, r.height});
      j["grid"] = {{"w", task.grid_w()}, {"h", task.grid_h()}, {"regions", regs}};
    }
  } else {
    j["view_space"] = {{"kind", "multiset"}, {"grid_side", task.grid_side()}, {"k", task.draws()}};
    j["cond"] = task.intensities();
  }
  return j.dump();
}

FiniteTask task_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("task json: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kTaskSchemaVersion)
      throw FormatError("task json: unsupported schema_version");
    Vector p_z = j.at("p_z").get<Vector>();
    std::optional<std::vector<std::size_t>> labels;
    if (j.contains("labels")) labels = j["labels"].get<std::vector<std::size_t>>();
    const auto& vs = j.at("view_space");
    const std::string kind = vs.at("kind").get<std::string>();
    if (kind == "enumerated") {
      const auto rows = j.at("cond").get<std::vector<Vector>>();
      const std::size_t n = vs.at("view_count").get<std::size_t>();
      DenseMatrix cond(rows.size(), n);
      for (std::size_t z = 0; z < rows.size(); ++z) {
        if (rows[z].size() != n) throw FormatError("task json: cond row length");
        std::copy(rows[z].begin(), rows[z].end(), cond.row_span(z).begin());
      }
      FiniteTask t = FiniteTask::enumerated(std::move(p_z), std::move(cond), std::move(labels));
      if (j.contains("grid")) {
        std::vector<Rect> regs;
        for (const auto& r : j["grid"].at("regions"))
          regs.push_back({r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>()});
        t.set_grid(j["grid"].at("w").get<std::size_t>(), j["grid"].at("h").get<std::size_t>(),
                   std::move(regs));
      }
      return t;
    }
    if (kind == "multiset") {
      return FiniteTask::multiset(vs.at("grid_side").get<std::size_t>(), vs.at("k").get<std::size_t>(),
                                  std::move(p_z), j.at("cond").get<std::vector<std::vector<Vector>>>(),
                                  std::move(labels));
    }
    throw FormatError("task json: unknown view_space kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw FormatError(std::string("task json: ") + e.what());
  }
}

}  // namespace pairspec::tasklab
