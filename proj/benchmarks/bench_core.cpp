// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "pairspec/analysis/analysis.hpp"
#include "pairspec/contrastive/train.hpp"
#include "pairspec/numkit/linalg.hpp"
#include "pairspec/spectra/spectra.hpp"
#include "pairspec/tasklab/generators.hpp"

using namespace pairspec;

namespace {

numkit::DenseMatrix random_symmetric(std::size_t n) {
  numkit::Rng rng(1, "bench-sym");
  numkit::DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
  return a;
}

tasklab::FiniteTask regions(std::size_t side) {
  numkit::Rng rng(2, "bench-regions");
  return tasklab::gen_regions_task(side, side,
                                   tasklab::random_covering_regions(side, side, side + 2, 4, 4, rng));
}

void BM_SymEigh(benchmark::State& state) {
  const auto a = random_symmetric(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(numkit::sym_eigh(a));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SymEigh)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed);

void BM_BuildExactOperator(benchmark::State& state) {
  const auto t = regions(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pospair::PosPairOperator::build_exact(t));
}
BENCHMARK(BM_BuildExactOperator)->Arg(8)->Arg(12)->Arg(16);

void BM_ExactEigenbasis(benchmark::State& state) {
  const auto op = pospair::PosPairOperator::build_exact(regions(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(spectra::exact_eigenbasis(op));
}
BENCHMARK(BM_ExactEigenbasis)->Arg(8)->Arg(12)->Arg(16);

void BM_KernelEvalMultiset(benchmark::State& state) {
  tasklab::SpriteParams p;
  numkit::Rng rng(3, "bench-sprites");
  const auto t = tasklab::gen_sprite_task(p, rng);
  const auto a = tasklab::sample_marginal_view(t, rng);
  const auto b = tasklab::sample_marginal_view(t, rng);
  for (auto _ : state) benchmark::DoNotOptimize(pospair::kernel_eval(t, a, b));
}
BENCHMARK(BM_KernelEvalMultiset);

void BM_TrainStep(benchmark::State& state) {
  const bool population = state.range(0) != 0;
  const auto t = regions(10);
  const contrastive::InputEncoder enc(t, contrastive::Encoding::onehot);
  contrastive::LossSpec loss;
  loss.population = population;
  const contrastive::Objective obj(t, enc, loss);
  numkit::Rng rng(4, "bench-train");
  contrastive::ModelSpec spec;
  spec.head.dim = 8;
  const contrastive::ParamKernel model(spec, enc.dim(), rng);
  const auto batch = obj.sample(256, rng);
  std::vector<numkit::DenseMatrix> grads;
  for (auto _ : state) benchmark::DoNotOptimize(obj.evaluate(model, batch, &grads));
  state.SetLabel(population ? "population" : "sampled, 256 pairs x 16 negatives");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MinimaxChallengers(benchmark::State& state) {
  numkit::Rng rng(5, "bench-minimax");
  const auto op = pospair::PosPairOperator::build_exact(tasklab::gen_random_task(8, 20, rng));
  const numkit::Rng base(5, "challengers");
  for (auto _ : state)
    benchmark::DoNotOptimize(analysis::minimax_verify(op, 4, 1.0, 1000, base, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_MinimaxChallengers)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
