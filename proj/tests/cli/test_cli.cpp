// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::path(PAIRSPEC_TEST_WORKDIR) / "cli";

struct Outcome {
  int code = -1;
  std::string err;
};

Outcome pairspec(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path err = kWork / "stderr.txt";
  const std::string cmd = std::string(PAIRSPEC_BINARY) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  o.err = ss.str();
  return o;
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

fs::path fresh(const std::string& name) {
  const fs::path p = kWork / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kFullConfig = R"({
  "seed": 11,
  "task": {"kind": "random", "latents": 5, "views": 10},
  "train": {"steps": 200},
  "neuralef": {"train": {"steps": 200}},
  "analysis": {"challengers": 50, "assumption_trials": 50, "perturbations": 10},
  "stages": ["task", "exact", "train", "kpca", "align", "neuralef", "minimax", "bound",
             "verify-minima", "assumption", "chain"]
})";

}  // namespace

TEST_CASE("T3 default pipeline: eigenvalues start with the invariant eigenvalue 1") {
  const fs::path out = fresh("t3");
  REQUIRE(pairspec("run --out " + out.string()).code == 0);
  std::ifstream in(out / "eigenvalues.csv");
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("0,1.0,", 0) == 0);

  const json manifest = json::parse(slurp(out / "manifest.json"));
  bool listed = false;
  for (const auto& f : manifest["files"])
    if (f["path"] == "eigenvalues.csv") {
      listed = true;
      CHECK(f["columns"] == json({"index", "lambda", "sigma2", "recovered", "disc"}));
    }
  CHECK(listed);
  CHECK(pairspec("check --out " + out.string()).code == 0);
}

TEST_CASE("same config and seed give identical manifests at any thread count") {
  const fs::path cfg = write_config("full.json", kFullConfig);
  const fs::path a = fresh("full1"), b = fresh("full2"), c = fresh("full3");
  REQUIRE(pairspec("--config " + cfg.string() + " --threads 1 run --out " + a.string()).code == 0);
  REQUIRE(pairspec("--config " + cfg.string() + " --threads 4 run --out " + b.string()).code == 0);
  setenv("PAIRSPEC_THREADS", "3", 1);
  REQUIRE(pairspec("--config " + cfg.string() + " run --out " + c.string()).code == 0);
  unsetenv("PAIRSPEC_THREADS");
  const std::string m = slurp(a / "manifest.json");
  CHECK(json::parse(m)["files"].size() >= 20);
  CHECK(m == slurp(b / "manifest.json"));
  CHECK(m == slurp(c / "manifest.json"));
}

TEST_CASE("resolved config.json reproduces the run") {
  const fs::path cfg = write_config("full.json", kFullConfig);
  const fs::path a = fresh("resolved1"), b = fresh("resolved2");
  REQUIRE(pairspec("--config " + cfg.string() + " run --out " + a.string()).code == 0);
  REQUIRE(pairspec("--config " + (a / "config.json").string() + " run --out " + b.string()).code == 0);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}

TEST_CASE("seed flag changes sampled outputs") {
  const fs::path cfg = write_config("full.json", kFullConfig);
  const fs::path a = fresh("seed1"), b = fresh("seed2");
  REQUIRE(pairspec("--config " + cfg.string() + " --seed 1 run --out " + a.string()).code == 0);
  REQUIRE(pairspec("--config " + cfg.string() + " --seed 2 run --out " + b.string()).code == 0);
  CHECK(slurp(a / "task.json") != slurp(b / "task.json"));
}

TEST_CASE("schema violations exit 2 with the field path") {
  auto o = pairspec("--config " + write_config("neg.json", R"({"train": {"batch": -4}})").string() + " run --out " +
                    fresh("neg").string());
  CHECK(o.code == 2);
  CHECK(o.err.find("config.train.batch") != std::string::npos);

  o = pairspec("--config " + write_config("unknown.json", R"({"train": {"stepz": 4}})").string() + " run --out " +
               fresh("unknown").string());
  CHECK(o.code == 2);
  CHECK(o.err.find("config.train.stepz") != std::string::npos);

  o = pairspec("--config " + write_config("stage.json", R"({"stages": ["task", "fit"]})").string() + " run --out " +
               fresh("stage").string());
  CHECK(o.code == 2);
  CHECK(o.err.find("config.stages[1]") != std::string::npos);

  CHECK(pairspec("no-such-command").code == 2);
}

TEST_CASE("numeric failure exits 3 with the stage name") {
  const auto o = pairspec("--config " + write_config("blow.json", R"({"train": {"lr": 1e300, "steps": 5}})").string() +
                          " train --out " + fresh("blow").string());
  CHECK(o.code == 3);
  CHECK(o.err.find("stage train") != std::string::npos);
}

TEST_CASE("subcommands share one output directory and check detects staleness") {
  const fs::path out = fresh("steps");
  REQUIRE(pairspec("exact --out " + out.string()).code == 0);
  REQUIRE(pairspec("train --out " + out.string()).code == 0);
  REQUIRE(pairspec("kpca --out " + out.string()).code == 0);
  REQUIRE(pairspec("align --checkpoint " + (out / "model.ckpt").string() + " --out " + out.string()).code == 0);
  REQUIRE(pairspec("chain --out " + out.string()).code == 0);
  const json manifest = json::parse(slurp(out / "manifest.json"));
  std::set<std::string> paths;
  for (const auto& f : manifest["files"]) paths.insert(f["path"].get<std::string>());
  for (const char* p : {"eigenvalues.csv", "model.ckpt", "kpca_eigenvalues.csv", "alignment.csv", "chain.csv"})
    CHECK(paths.count(p) == 1);
  CHECK(pairspec("check --out " + out.string()).code == 0);
  std::ofstream(out / "chain.csv", std::ios::app) << "tampered\n";
  CHECK(pairspec("check --out " + out.string()).code == 1);
}

TEST_CASE("kpca without a trained model is a configuration error") {
  const auto o = pairspec("kpca --out " + fresh("nomodel").string());
  CHECK(o.code == 2);
  CHECK(o.err.find("checkpoint") != std::string::npos);
}
