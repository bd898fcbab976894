// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "manifest.hpp"
#include "pairspec/errors.hpp"
#include "pairspec/numkit/parallel.hpp"
#include "pipeline.hpp"

namespace {

using namespace pairspec;

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

int run_stages(const GlobalFlags& g, const std::vector<std::string>& stages, const std::string& checkpoint) {
  cli::ExperimentConfig cfg = g.config.empty() ? cli::parse_config(nlohmann::json::object()) : cli::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  cli::PipelineOptions opt;
  opt.out = g.out.empty() ? cfg.out : g.out;
  opt.threads = g.threads ? *g.threads : numkit::threads_from_env(cfg.threads);
  if (!checkpoint.empty()) opt.checkpoint = checkpoint;
  cli::Pipeline pipeline(cfg, opt);
  for (const auto& s : stages.empty() ? cfg.stages : stages) pipeline.run_stage(s);
  pipeline.finish();
  return 0;
}

int check(const GlobalFlags& g) {
  std::string dir = g.out;
  if (dir.empty()) dir = g.config.empty() ? "out" : cli::load_config(g.config).out;
  const auto stale = cli::stale_files(dir);
  for (const auto& f : stale) std::cout << "stale " << f << '\n';
  if (stale.empty()) std::cout << "up to date\n";
  return stale.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Positive-pair kernel spectra: exact construction, learned kernels and checks"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override config.seed");
  app.add_option("--threads", g.threads, "Worker threads (0: all cores); overrides PAIRSPEC_THREADS");
  app.add_option("--out", g.out, "Output directory; overrides config.out");

  std::string checkpoint;
  std::vector<std::string> stages;
  std::function<int()> action;

  auto stage_command = [&](const std::string& name, const std::string& help, std::vector<std::string> run) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&, run] {
      action = [&, run] { return run_stages(g, run, checkpoint); };
    });
    return sub;
  };

  auto* task = app.add_subcommand("task", "Task construction");
  task->require_subcommand(1);
  auto* gen = task->add_subcommand("gen", "Build the configured task and write task.json");
  gen->callback([&] { action = [&] { return run_stages(g, {"task"}, checkpoint); }; });

  stage_command("exact", "Exact K+, M, P, L, p(a) and the eigenbasis", {"task", "exact"});
  stage_command("train", "Train the configured contrastive kernel", {"task", "train"});
  for (auto* sub : {stage_command("kpca", "Kernel PCA of the trained kernel", {"task", "kpca"}),
                    stage_command("align", "Align learned components with the exact eigenbasis", {"task", "align"})})
    sub->add_option("--checkpoint", checkpoint, "Model checkpoint (default: OUT/model.ckpt)")->check(CLI::ExistingFile);
  stage_command("neuralef", "Train NeuralEF eigenfunctions", {"task", "neuralef"});
  stage_command("minimax", "Worst-case approximation of every d-dimensional subspace", {"task", "minimax"});
  stage_command("bound", "Excess-risk bound trials", {"task", "bound"});
  stage_command("verify-minima", "Population loss minimizers against perturbations", {"task", "verify-minima"});
  stage_command("assumption", "Random trials of the smoothness inequality", {"task", "assumption"});
  auto* down = app.add_subcommand("downstream", "Least-squares classification on a representation");
  down->add_option("--checkpoint", checkpoint, "Model checkpoint (default: OUT/model.ckpt)")->check(CLI::ExistingFile);
  down->callback([&] {
    action = [&] {
      cli::ExperimentConfig cfg =
          g.config.empty() ? cli::parse_config(nlohmann::json::object()) : cli::load_config(g.config);
      std::vector<std::string> run = {"task"};
      if (cfg.analysis.downstream.representation == "neuralef") run.push_back("neuralef");
      run.push_back("downstream");
      return run_stages(g, run, checkpoint);
    };
  });
  stage_command("chain", "Augmentation-chain trajectory with eigenfunction values", {"task", "chain"});

  auto* run = app.add_subcommand("run", "Run config.stages in order");
  run->add_option("--stages", stages, "Override config.stages");
  run->add_option("--checkpoint", checkpoint, "Model checkpoint for stages after train")->check(CLI::ExistingFile);
  run->callback([&] { action = [&] { return run_stages(g, stages, checkpoint); }; });

  auto* chk = app.add_subcommand("check", "Compare output files against manifest.json");
  chk->callback([&] { action = [&] { return check(g); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    return action();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cli::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
}
