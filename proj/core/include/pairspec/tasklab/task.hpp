// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pairspec/numkit/dense_matrix.hpp"
#include "pairspec/numkit/rng.hpp"

namespace pairspec::tasklab {

using numkit::DenseMatrix;
using numkit::Rng;
using numkit::Vector;

/// A view: either an enumerated id or a sorted multiset of grid-cell indices.
class ViewSample {
 public:
  ViewSample() = default;
  static ViewSample enumerated(std::size_t id);
  /// Sorts `cells` so equal multisets compare equal.
  static ViewSample multiset(std::vector<std::uint32_t> cells);

  bool is_multiset() const noexcept { return multiset_; }
  std::size_t id() const;
  std::span<const std::uint32_t> cells() const noexcept { return cells_; }

  auto operator<=>(const ViewSample&) const = default;

 private:
  bool multiset_ = false;
  std::size_t id_ = 0;
  std::vector<std::uint32_t> cells_;
};

struct PosPair {
  ViewSample first;
  ViewSample second;
  std::size_t latent = 0;
};

struct ChainStep {
  ViewSample view;
  /// Latent drawn from p(z | view) to produce the next view; empty on the last step.
  std::optional<std::size_t> latent;
};

/// Axis-aligned rectangle of grid points [x0, x0 + width) x [y0, y0 + height).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int width = 1;
  int height = 1;
  auto operator<=>(const Rect&) const = default;
};

enum class ViewKind { kEnumerated, kMultiset };

class FiniteTask {
 public:
  /// Enumerated-view task. `cond` is |Z| x |A| and row-stochastic.
  static FiniteTask enumerated(Vector p_z, DenseMatrix cond,
                               std::optional<std::vector<std::size_t>> labels = std::nullopt);
  /// Multiset-view task. intensities[z][copy] is a strictly positive grid of
  /// grid_side^2 cells summing to one.
  static FiniteTask multiset(std::size_t grid_side, std::size_t k, Vector p_z,
                             std::vector<std::vector<Vector>> intensities,
                             std::optional<std::vector<std::size_t>> labels = std::nullopt);

  ViewKind kind() const noexcept { return kind_; }
  bool is_enumerated() const noexcept { return kind_ == ViewKind::kEnumerated; }
  std::size_t latent_count() const noexcept { return p_z_.size(); }
  const Vector& p_z() const noexcept { return p_z_; }
  const std::optional<std::vector<std::size_t>>& labels() const noexcept { return labels_; }
  std::size_t class_count() const;

  // Enumerated views.
  std::size_t view_count() const;
  const DenseMatrix& cond() const;

  // Grid geometry, present for region tasks.
  bool has_grid() const noexcept { return grid_w_ > 0; }
  std::size_t grid_w() const noexcept { return grid_w_; }
  std::size_t grid_h() const noexcept { return grid_h_; }
  const std::vector<Rect>& regions() const noexcept { return regions_; }
  void set_grid(std::size_t w, std::size_t h, std::vector<Rect> regions);

  // Multiset views.
  std::size_t grid_side() const noexcept { return grid_side_; }
  std::size_t cell_count() const noexcept { return grid_side_ * grid_side_; }
  std::size_t draws() const noexcept { return k_; }
  const std::vector<std::vector<Vector>>& intensities() const noexcept { return intensities_; }

  bool valid_view(const ViewSample& a) const;

 private:
  friend double cond_prob(const FiniteTask&, std::size_t, const ViewSample&);
  friend ViewSample sample_view(const FiniteTask&, std::size_t, Rng&);

  ViewKind kind_ = ViewKind::kEnumerated;
  Vector p_z_;
  std::optional<std::vector<std::size_t>> labels_;
  DenseMatrix cond_;
  std::vector<Vector> cond_cdf_;
  std::size_t grid_w_ = 0;
  std::size_t grid_h_ = 0;
  std::vector<Rect> regions_;
  std::size_t grid_side_ = 0;
  std::size_t k_ = 0;
  std::vector<std::vector<Vector>> intensities_;
  std::vector<std::vector<Vector>> intensity_cdf_;
  std::vector<std::vector<Vector>> log_intensities_;
};

/// p(a | z). Multiset views: mean over copies of the multinomial PMF.
double cond_prob(const FiniteTask& task, std::size_t z, const ViewSample& a);
/// Marginal p(a) = sum_z p(z) p(a | z).
double marginal_prob(const FiniteTask& task, const ViewSample& a);
/// Posterior p(z | a); throws UnreachableViewError when p(a) is below 1e-300.
Vector latent_posterior(const FiniteTask& task, const ViewSample& a);

ViewSample sample_view(const FiniteTask& task, std::size_t z, Rng& rng);
/// Draw from the view marginal p(a).
ViewSample sample_marginal_view(const FiniteTask& task, Rng& rng);
PosPair sample_pair(const FiniteTask& task, Rng& rng);
std::vector<ChainStep> sample_chain(const FiniteTask& task, const ViewSample& start,
                                    std::size_t steps, Rng& rng);

/// Views below this marginal are rejected as unreachable.
inline constexpr double kUnreachableMarginal = 1e-300;

}  // namespace pairspec::tasklab
