// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/tasklab/task.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pairspec/errors.hpp"

namespace pairspec::tasklab {

namespace {

constexpr double kSumTol = 1e-12;

void require_distribution(std::span<const double> p, const std::string& what) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DimensionError(what + ": negative or non-finite entry");
    s += x;
  }
  if (std::abs(s - 1.0) > kSumTol) {
    throw DimensionError(what + ": sums to " + std::to_string(s) + ", expected 1");
  }
}

Vector cumulative(std::span<const double> p) {
  Vector c(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) c[i] = (acc += p[i]);
  return c;
}

std::size_t draw_from_cdf(const Vector& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  auto i = static_cast<std::size_t>(it - cdf.begin());
  // Rounding at the top end must not land on a trailing zero-mass entry.
  while (i > 0 && cdf[i] == cdf[i - 1]) --i;
  return i;
}

void check_labels(const std::optional<std::vector<std::size_t>>& labels, std::size_t latents) {
  if (labels && labels->size() != latents)
    throw DimensionError("labels: expected one per latent");
}

}  // namespace

ViewSample ViewSample::enumerated(std::size_t id) {
  ViewSample v;
  v.id_ = id;
  return v;
}

ViewSample ViewSample::multiset(std::vector<std::uint32_t> cells) {
  ViewSample v;
  v.multiset_ = true;
  std::sort(cells.begin(), cells.end());
  v.cells_ = std::move(cells);
  return v;
}

std::size_t ViewSample::id() const {
  if (multiset_) throw DimensionError("ViewSample::id called on a multiset view");
  return id_;
}

FiniteTask FiniteTask::enumerated(Vector p_z, DenseMatrix cond,
                                  std::optional<std::vector<std::size_t>> labels) {
  if (p_z.empty()) throw DimensionError("task: no latents");
  if (cond.rows() != p_z.size()) throw DimensionError("task: cond rows must equal latent count");
  require_distribution(p_z, "p_z");
  for (std::size_t z = 0; z < cond.rows(); ++z)
    require_distribution(cond.row_span(z), "cond row " + std::to_string(z));
  check_labels(labels, p_z.size());
  FiniteTask t;
  t.kind_ = ViewKind::kEnumerated;
  t.p_z_ = std::move(p_z);
  t.cond_ = std::move(cond);
  t.labels_ = std::move(labels);
  for (std::size_t z = 0; z < t.cond_.rows(); ++z) t.cond_cdf_.push_back(cumulative(t.cond_.row_span(z)));
  return t;
}

FiniteTask FiniteTask::multiset(std::size_t grid_side, std::size_t k, Vector p_z,
                                std::vector<std::vector<Vector>> intensities,
                                std::optional<std::vector<std::size_t>> labels) {
  if (k < 1) throw DimensionError("task: k must be at least 1");
  if (grid_side < 1) throw DimensionError("task: empty grid");
  if (p_z.empty() || intensities.size() != p_z.size())
    throw DimensionError("task: one intensity list per latent required");
  require_distribution(p_z, "p_z");
  check_labels(labels, p_z.size());
  const std::size_t cells = grid_side * grid_side;
  FiniteTask t;
  t.kind_ = ViewKind::kMultiset;
  t.grid_side_ = grid_side;
  t.k_ = k;
  for (std::size_t z = 0; z < intensities.size(); ++z) {
    if (intensities[z].empty()) throw DimensionError("task: latent without intensity copies");
    std::vector<Vector> cdfs, logs;
    for (const auto& q : intensities[z]) {
      if (q.size() != cells) throw DimensionError("task: intensity grid has wrong cell count");
      for (double x : q)
        if (!(x > 0.0)) throw DimensionError("task: intensity grids must be strictly positive");
      require_distribution(q, "intensity grid of latent " + std::to_string(z));
      cdfs.push_back(cumulative(q));
      Vector lq(q.size());
      std::transform(q.begin(), q.end(), lq.begin(), [](double x) { return std::log(x); });
      logs.push_back(std::move(lq));
    }
    t.intensity_cdf_.push_back(std::move(cdfs));
    t.log_intensities_.push_back(std::move(logs));
  }
  t.p_z_ = std::move(p_z);
  t.intensities_ = std::move(intensities);
  t.labels_ = std::move(labels);
  return t;
}

std::size_t FiniteTask::class_count() const {
  if (!labels_) return 0;
  std::size_t m = 0;
  for (std::size_t y : *labels_) m = std::max(m, y + 1);
  return m;
}

std::size_t FiniteTask::view_count() const {
  if (!is_enumerated()) throw DimensionError("view_count: task has multiset views");
  return cond_.cols();
}

const DenseMatrix& FiniteTask::cond() const {
  if (!is_enumerated()) throw DimensionError("cond: task has multiset views");
  return cond_;
}

void FiniteTask::set_grid(std::size_t w, std::size_t h, std::vector<Rect> regions) {
  if (!is_enumerated() || w * h != cond_.cols()) throw DimensionError("set_grid: size mismatch");
  grid_w_ = w;
  grid_h_ = h;
  regions_ = std::move(regions);
}

bool FiniteTask::valid_view(const ViewSample& a) const {
  if (is_enumerated()) return !a.is_multiset() && a.id() < cond_.cols();
  if (!a.is_multiset() || a.cells().size() != k_) return false;
  return std::all_of(a.cells().begin(), a.cells().end(),
                     [&](std::uint32_t c) { return c < cell_count(); });
}

double cond_prob(const FiniteTask& task, std::size_t z, const ViewSample& a) {
  if (z >= task.latent_count()) throw DimensionError("cond_prob: latent index out of range");
  if (!task.valid_view(a)) throw DimensionError("cond_prob: view does not belong to this task");
  if (task.is_enumerated()) return task.cond_(z, a.id());

  // Multinomial coefficient from run lengths of the sorted cells.
  const auto cells = a.cells();
  double log_coef = std::lgamma(static_cast<double>(cells.size()) + 1.0);
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    while (j < cells.size() && cells[j] == cells[i]) ++j;
    log_coef -= std::lgamma(static_cast<double>(j - i) + 1.0);
    i = j;
  }
  const auto& logs = task.log_intensities_[z];
  double total = 0.0;
  for (const auto& lq : logs) {
    double s = log_coef;
    for (std::uint32_t c : cells) s += lq[c];
    total += std::exp(s);
  }
  return total / static_cast<double>(logs.size());
}

double marginal_prob(const FiniteTask& task, const ViewSample& a) {
  double s = 0.0;
  for (std::size_t z = 0; z < task.latent_count(); ++z) {
    if (task.p_z()[z] > 0.0) s += task.p_z()[z] * cond_prob(task, z, a);
  }
  return s;
}

Vector latent_posterior(const FiniteTask& task, const ViewSample& a) {
  Vector post(task.latent_count());
  double s = 0.0;
  for (std::size_t z = 0; z < post.size(); ++z) s += post[z] = task.p_z()[z] * cond_prob(task, z, a);
  if (!(s >= kUnreachableMarginal)) {
    throw UnreachableViewError("view has marginal probability " + std::to_string(s) +
                               ", below the reachability threshold");
  }
  for (double& x : post) x /= s;
  return post;
}

ViewSample sample_view(const FiniteTask& task, std::size_t z, Rng& rng) {
  if (task.is_enumerated()) return ViewSample::enumerated(draw_from_cdf(task.cond_cdf_[z], rng));
  const auto& cdfs = task.intensity_cdf_[z];
  const auto& cdf = cdfs[rng.uniform_int(cdfs.size())];
  std::vector<std::uint32_t> cells(task.draws());
  for (auto& c : cells) c = static_cast<std::uint32_t>(draw_from_cdf(cdf, rng));
  return ViewSample::multiset(std::move(cells));
}

ViewSample sample_marginal_view(const FiniteTask& task, Rng& rng) {
  const std::size_t z = rng.categorical(task.p_z());
  return sample_view(task, z, rng);
}

PosPair sample_pair(const FiniteTask& task, Rng& rng) {
  PosPair pair;
  pair.latent = rng.categorical(task.p_z());
  pair.first = sample_view(task, pair.latent, rng);
  pair.second = sample_view(task, pair.latent, rng);
  return pair;
}

std::vector<ChainStep> sample_chain(const FiniteTask& task, const ViewSample& start,
                                    std::size_t steps, Rng& rng) {
  std::vector<ChainStep> path;
  path.reserve(steps + 1);
  // Validates reachability of the start view even when no step is taken.
  latent_posterior(task, start);
  ViewSample current = start;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t z = rng.categorical(latent_posterior(task, current));
    path.push_back({current, z});
    current = sample_view(task, z, rng);
  }
  path.push_back({current, std::nullopt});
  return path;
}

}  // namespace pairspec::tasklab
