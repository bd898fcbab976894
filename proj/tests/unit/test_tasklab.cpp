// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>

#include "doctest.h"
#include "pairspec/errors.hpp"
#include "pairspec/pospair/operator.hpp"
#include "pairspec/tasklab/generators.hpp"

using namespace pairspec;
using namespace pairspec::tasklab;

namespace {

Vector marginal(const FiniteTask& t) {
  Vector p(t.view_count(), 0.0);
  for (std::size_t z = 0; z < t.latent_count(); ++z)
    for (std::size_t a = 0; a < p.size(); ++a) p[a] += t.p_z()[z] * t.cond()(z, a);
  return p;
}

// Chi-square upper-tail probability via the Wilson-Hilferty normal approximation.
double chi2_sf(double x, double dof) {
  const double z = (std::cbrt(x / dof) - (1 - 2 / (9 * dof))) / std::sqrt(2 / (9 * dof));
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace

TEST_CASE("regions: single region covering a 1x2 grid") {
  const FiniteTask t = gen_regions_task(2, 1, {{0, 0, 2, 1}});
  const Vector p = marginal(t);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("regions: overlapping pair task marginals and cond_prob") {
  const FiniteTask t = overlapping_pair_task();
  const Vector p = marginal(t);
  CHECK(p[0] == doctest::Approx(0.25));
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK(p[2] == doctest::Approx(0.25));
  CHECK(cond_prob(t, 0, ViewSample::enumerated(1)) == 0.5);
  CHECK(cond_prob(t, 0, ViewSample::enumerated(2)) == 0.0);
}

TEST_CASE("regions: coverage errors") {
  CHECK_THROWS_AS(gen_regions_task(3, 1, {{0, 0, 2, 1}}), CoverageError);
  CHECK_THROWS_AS(gen_regions_task(3, 1, {{0, 0, 3, 1}, {5, 5, 1, 1}}), CoverageError);
}

TEST_CASE("regions: random 10x10 layout satisfies invariants") {
  Rng rng(1, "regions");
  const auto regs = random_covering_regions(10, 10, 12, 4, 4, rng);
  CHECK(regs.size() == 12);
  const FiniteTask t = gen_regions_task(10, 10, regs, rng);
  CHECK(t.view_count() == 100);
  double pz = 0.0;
  for (double x : t.p_z()) pz += x;
  CHECK(std::abs(pz - 1.0) < 1e-12);
  for (std::size_t z = 0; z < t.latent_count(); ++z) {
    double s = 0.0;
    for (double v : t.cond().row_span(z)) s += v;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  for (double p : marginal(t)) CHECK(p > 0.0);
}

TEST_CASE("tiled regions: nine overlapping tiles on 12x12") {
  const auto regs = tiled_regions(12, 6, 3);
  CHECK(regs.size() == 9);
  CHECK_NOTHROW(gen_regions_task(12, 12, regs));
}

TEST_CASE("multiset: closed-form multinomial probabilities") {
  const FiniteTask t = FiniteTask::multiset(1, 2, {1.0}, {{{1.0}}});
  CHECK(cond_prob(t, 0, ViewSample::multiset({0, 0})) == doctest::Approx(1.0));
  // Two cells with probabilities (0.5, 0.5) need a 2x2 grid; use (0.5, 0.5, tiny, tiny) padding.
  const double e = 1e-300;
  const FiniteTask t2 = FiniteTask::multiset(2, 2, {1.0}, {{{0.5 - e, 0.5 - e, e, e}}});
  CHECK(cond_prob(t2, 0, ViewSample::multiset({1, 0})) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cond_prob(t2, 0, ViewSample::multiset({0, 0})) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("multiset: uniform grid with k=1 gives uniform conditional") {
  const Vector q(16, 1.0 / 16);
  const FiniteTask t = FiniteTask::multiset(4, 1, {1.0}, {{q}});
  for (std::uint32_t c = 0; c < 16; ++c)
    CHECK(cond_prob(t, 0, ViewSample::multiset({c})) == doctest::Approx(1.0 / 16));
}

TEST_CASE("multiset: views are canonicalized") {
  CHECK(ViewSample::multiset({3, 1, 2}) == ViewSample::multiset({1, 2, 3}));
  CHECK(ViewSample::multiset({3, 1, 2}).cells()[0] == 1);
}

TEST_CASE("sprites: invariants and positive cond_prob of sampled views") {
  Rng rng(4, "sprites");
  SpriteParams params;
  params.grid = 8;
  params.class_count = 3;
  params.sprites_per_class = 10;
  params.copies = 4;
  params.k = 10;
  const FiniteTask t = gen_sprite_task(params, rng);
  CHECK(t.latent_count() == 30);
  CHECK(t.class_count() == 3);
  for (const auto& copies : t.intensities()) {
    CHECK(copies.size() == 4);
    for (const auto& q : copies) {
      double s = 0.0;
      for (double x : q) {
        CHECK(x > 0.0);
        s += x;
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
  Rng draw(5, "draw");
  for (int i = 0; i < 50; ++i) {
    const auto pair = sample_pair(t, draw);
    CHECK(pair.first.cells().size() == 10);
    CHECK(cond_prob(t, pair.latent, pair.first) > 0.0);
    CHECK(marginal_prob(t, pair.second) > 0.0);
  }
}

TEST_CASE("sprites: importance-weighted mass is one") {
  // E_{a ~ q}[p(a)/q(a)] = 1 for q = p(a|z0), checks that cond_prob is a normalized PMF.
  Rng rng(8, "sprites-mass");
  SpriteParams params;
  params.grid = 4;
  params.class_count = 2;
  params.sprites_per_class = 2;
  params.copies = 2;
  params.k = 3;
  const FiniteTask t = gen_sprite_task(params, rng);
  const int n = 20000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto v = sample_view(t, 0, rng);
    s += marginal_prob(t, v) / cond_prob(t, 0, v);
  }
  CHECK(s / n == doctest::Approx(1.0).epsilon(0.01 * 3));
}

TEST_CASE("sprites: duplicated latent equals merged latent with doubled prior") {
  Rng rng(2, "dup");
  SpriteParams params;
  params.grid = 4;
  params.class_count = 2;
  params.sprites_per_class = 1;
  params.copies = 2;
  params.k = 2;
  const FiniteTask base = gen_sprite_task(params, rng);
  const auto& q = base.intensities();
  const FiniteTask dup =
      FiniteTask::multiset(4, 2, {0.25, 0.25, 0.5}, {q[0], q[0], q[1]});
  const FiniteTask merged = FiniteTask::multiset(4, 2, {0.5, 0.5}, {q[0], q[1]});
  Rng draw(3, "draw");
  for (int i = 0; i < 100; ++i) {
    const auto a = sample_marginal_view(merged, draw);
    const auto b = sample_marginal_view(merged, draw);
    CHECK(std::abs(pospair::kernel_eval(dup, a, b) - pospair::kernel_eval(merged, a, b)) < 1e-10);
  }
}

TEST_CASE("sample_pair: determinism and impossible pairs") {
  const FiniteTask t = overlapping_pair_task();
  Rng r1(3, "pairs"), r2(3, "pairs");
  int impossible = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto p = sample_pair(t, r1);
    const auto q = sample_pair(t, r2);
    CHECK(p.first == q.first);
    CHECK(p.second == q.second);
    const auto a = p.first.id(), b = p.second.id();
    if ((a == 0 && b == 2) || (a == 2 && b == 0)) ++impossible;
  }
  CHECK(impossible == 0);
}

TEST_CASE("sample_pair: single latent joint is the product of conditionals") {
  const DenseMatrix cond{{0.2, 0.3, 0.5}};
  const FiniteTask t = FiniteTask::enumerated({1.0}, cond);
  Rng rng(12, "joint");
  const int n = 100000;
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_pair(t, rng);
    ++counts[{p.first.id(), p.second.id()}];
  }
  double chi2 = 0.0;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      const double expected = n * cond(0, a) * cond(0, b);
      const double d = counts[{a, b}] - expected;
      chi2 += d * d / expected;
    }
  CHECK(chi2_sf(chi2, 8.0) > 0.01);
}

TEST_CASE("sample_pair: view marginal within 3 sigma") {
  Rng rng(21, "marg");
  const FiniteTask t = gen_random_task(4, 6, rng);
  const Vector p = marginal(t);
  const int n = 100000;
  std::vector<int> counts(6, 0);
  for (int i = 0; i < n; ++i) {
    const auto pair = sample_pair(t, rng);
    ++counts[pair.first.id()];
  }
  for (std::size_t a = 0; a < 6; ++a) {
    const double sigma = std::sqrt(n * p[a] * (1 - p[a]));
    CHECK(std::abs(counts[a] - n * p[a]) <= 3 * sigma);
  }
}

TEST_CASE("sample_chain: transitions, stationarity, edge cases") {
  const FiniteTask t = overlapping_pair_task();
  Rng rng(5, "chain");
  const auto path = sample_chain(t, ViewSample::enumerated(0), 1, rng);
  CHECK(path.size() == 2);
  CHECK(path[0].latent.has_value());
  CHECK(!path[1].latent.has_value());
  for (int i = 0; i < 1000; ++i) {
    const auto step = sample_chain(t, ViewSample::enumerated(0), 1, rng);
    CHECK(step[1].view.id() != 2);
  }
  const auto zero = sample_chain(t, ViewSample::enumerated(1), 0, rng);
  CHECK(zero.size() == 1);
  CHECK(zero[0].view == ViewSample::enumerated(1));

  const FiniteTask single = FiniteTask::enumerated({1.0}, DenseMatrix{{0.1, 0.2, 0.3, 0.4}});
  const auto long_path = sample_chain(single, ViewSample::enumerated(0), 10000, rng);
  std::vector<double> freq(4, 0.0);
  for (std::size_t s = 100; s < long_path.size(); ++s) freq[long_path[s].view.id()] += 1.0;
  double tv = 0.0;
  for (std::size_t a = 0; a < 4; ++a) tv += std::abs(freq[a] / (long_path.size() - 100) - single.cond()(0, a));
  CHECK(tv / 2 < 0.02);

  const FiniteTask gap = FiniteTask::enumerated({0.5, 0.5}, DenseMatrix{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
  CHECK_THROWS_AS(sample_chain(gap, ViewSample::enumerated(2), 3, rng), UnreachableViewError);
}

TEST_CASE("cond_prob: enumerated rows sum to one") {
  Rng rng(30, "rows");
  const FiniteTask t = gen_random_task(5, 9, rng);
  for (std::size_t z = 0; z < 5; ++z) {
    double s = 0.0;
    for (std::size_t a = 0; a < 9; ++a) s += cond_prob(t, z, ViewSample::enumerated(a));
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("task json round-trip") {
  Rng rng(6, "json");
  const FiniteTask t = gen_regions_task(10, 10, random_covering_regions(10, 10, 12, 4, 4, rng));
  const FiniteTask back = task_from_json(task_to_json(t));
  CHECK(back.cond() == t.cond());
  CHECK(back.p_z() == t.p_z());
  CHECK(back.regions() == t.regions());
  CHECK(task_to_json(back) == task_to_json(t));

  SpriteParams params;
  params.grid = 4;
  params.class_count = 2;
  params.sprites_per_class = 1;
  params.copies = 1;
  params.k = 2;
  const FiniteTask s = gen_sprite_task(params, rng);
  const FiniteTask sback = task_from_json(task_to_json(s));
  CHECK(sback.intensities() == s.intensities());
  CHECK(sback.labels() == s.labels());
  CHECK_THROWS_AS(task_from_json("{\"schema_version\": 9}"), FormatError);
}

TEST_CASE("generator argument validation") {
  Rng rng(1, "bad");
  SpriteParams params;
  params.grid = 3;
  CHECK_THROWS_AS(gen_sprite_task(params, rng), DimensionError);
  params.grid = 8;
  params.k = 0;
  CHECK_THROWS_AS(gen_sprite_task(params, rng), DimensionError);
  CHECK_THROWS(FiniteTask::enumerated({0.5, 0.6}, DenseMatrix{{1.0}, {1.0}}));
}
