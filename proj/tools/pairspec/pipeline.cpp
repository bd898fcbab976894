// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>

#include "json.hpp"
#include "pairspec/errors.hpp"
#include "pairspec/numkit/matrix_io.hpp"
#include "pairspec/numkit/parallel.hpp"

namespace pairspec::cli {

using nlohmann::json;
using numkit::DenseMatrix;
using numkit::format_real;
using numkit::Rng;
using numkit::Vector;
using tasklab::FiniteTask;
using tasklab::ViewSample;
namespace fs = std::filesystem;

namespace {

// JSON has no infinities; non-finite values are written as strings.
json real(double x) { return std::isfinite(x) ? json(x) : json(format_real(x)); }

json reals(const std::vector<double>& xs) {
  json out = json::array();
  for (double x : xs) out.push_back(real(x));
  return out;
}

std::string cell(double x) { return format_real(x); }
std::string cell(std::size_t i) { return std::to_string(i); }

using Row = std::vector<std::string>;

}  // namespace

struct Pipeline::State {
  ExperimentConfig cfg;
  PipelineOptions opt;
  std::vector<ManifestEntry> files;
  json report = json::object();

  std::optional<FiniteTask> task;
  std::optional<pospair::PosPairOperator> op;
  std::optional<spectra::EigenBasis> exact;
  std::optional<contrastive::ParamKernel> model;
  std::optional<spectra::SpectrumComparison> comparison;
  std::optional<spectra::KernelPca> sampled_pca;
  std::optional<neuralef::NefResult> nef;

  Rng stream(std::string_view label) const { return Rng(cfg.seed, label); }

  // ---- outputs ----

  fs::path path(const std::string& name) const { return opt.out / name; }

  void record(const std::string& name, std::vector<std::string> columns = {}) {
    for (auto& f : files)
      if (f.path == name) {
        f.columns = std::move(columns);
        return;
      }
    files.push_back({name, "", 0, std::move(columns)});
  }

  std::ofstream open(const std::string& name) {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw FormatError("cannot write '" + path(name).string() + "'");
    return out;
  }

  void write_csv(const std::string& name, std::vector<std::string> columns, const std::vector<Row>& rows) {
    auto out = open(name);
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << '\n';
    }
    record(name, std::move(columns));
  }

  void write_matrix(const std::string& name, const DenseMatrix& m, std::string layout) {
    auto out = open(name);
    numkit::write_csv(out, m);
    record(name, {std::move(layout)});
  }

  void write_json(const std::string& name, const json& j) {
    open(name) << j.dump(2) << '\n';
    record(name);
  }

  // ---- lazily built inputs ----

  const FiniteTask& the_task() {
    if (!task) task = build_task(cfg.task, cfg.seed);
    return *task;
  }

  const pospair::PosPairOperator& the_op(const std::string& stage) {
    if (!the_task().is_enumerated()) throw ConfigError("config.stages: " + stage + " needs an enumerated task");
    if (!op) op = pospair::PosPairOperator::build_exact(*task);
    return *op;
  }

  const spectra::EigenBasis& the_exact(const std::string& stage) {
    if (!exact) exact = spectra::exact_eigenbasis(the_op(stage));
    return *exact;
  }

  contrastive::InputEncoder model_encoder() {
    return cfg.model.encoding ? contrastive::InputEncoder(the_task(), *cfg.model.encoding)
                              : contrastive::InputEncoder::automatic(the_task());
  }

  const contrastive::ParamKernel& the_model() {
    if (!model) {
      const fs::path ckpt = opt.checkpoint.value_or(path("model.ckpt"));
      if (!fs::exists(ckpt)) throw ConfigError("checkpoint: no trained model at '" + ckpt.string() + "'; run train first");
      model = contrastive::load_checkpoint(ckpt.string());
      if (model->input_dim() != model_encoder().dim())
        throw ConfigError("checkpoint: model input size does not match the configured task encoding");
    }
    return *model;
  }

  spectra::KernelFn model_kernel() {
    const contrastive::InputEncoder enc = model_encoder();
    const contrastive::ParamKernel& m = the_model();
    return [enc, &m](const ViewSample& a, const ViewSample& b) {
      return m.kernel_forward(enc.encode({a}), enc.encode({b}))[0];
    };
  }

  DenseMatrix model_gram(const std::vector<ViewSample>& views) {
    const contrastive::InputEncoder enc = model_encoder();
    const DenseMatrix inputs = enc.encode(views);
    return the_model().gram(inputs);
  }

  // ---- stages ----

  void stage_task() {
    const FiniteTask& t = the_task();
    open("task.json") << tasklab::task_to_json(t) << '\n';
    record("task.json");
    report["task"] = {{"kind", cfg.task.kind},
                      {"enumerated", t.is_enumerated()},
                      {"latents", t.latent_count()},
                      {"views", t.is_enumerated() ? json(t.view_count()) : json(nullptr)},
                      {"classes", t.labels() ? json(t.class_count()) : json(nullptr)}};
  }

  void stage_exact() {
    const auto& op = the_op("exact");
    const auto& basis = the_exact("exact");
    const auto pca = spectra::population_kpca(op);
    std::vector<Row> rows;
    json eig = json::array();
    for (std::size_t i = 0; i < basis.size(); ++i) {
      const auto f = basis.functions.row_span(i);
      rows.push_back({cell(i), cell(basis.eigenvalues[i]), cell(pca.variances[i]),
                      cell(spectra::recover_eigenvalue(op, f)), cell(pospair::discrepancy(op, f))});
      eig.push_back(real(basis.eigenvalues[i]));
    }
    write_csv("eigenvalues.csv", {"index", "lambda", "sigma2", "recovered", "disc"}, rows);
    write_matrix("eigenfunctions.csv", basis.functions, "row i: f_i on views 0..n-1");
    write_matrix("kernel.csv", op.kernel(), "K+ on views 0..n-1");
    write_matrix("symmetric.csv", op.symmetric(), "M on views 0..n-1");
    write_matrix("joint.csv", op.joint(), "P on views 0..n-1");
    write_matrix("laplacian.csv", op.laplacian(), "L on views 0..n-1");
    write_matrix("p_a.csv", DenseMatrix::column(op.p_a()), "p(a) for views 0..n-1");
    report["exact"] = {{"eigenvalues", eig}};
  }

  void stage_train() {
    const FiniteTask& t = the_task();
    const contrastive::InputEncoder enc = model_encoder();
    contrastive::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    if (cfg.loss.population && !t.is_enumerated())
      throw ConfigError("config.loss.population: needs an enumerated task");
    Rng init_rng = stream("model-init");
    contrastive::ParamKernel init(cfg.model.spec, enc.dim(), init_rng);
    const contrastive::Objective objective(t, enc, cfg.loss);
    auto result = contrastive::train(objective, std::move(init), tc);
    model = std::move(result.model);
    comparison.reset();
    sampled_pca.reset();
    contrastive::save_checkpoint(path("model.ckpt").string(), *model);
    record("model.ckpt");
    std::vector<Row> rows;
    for (const auto& c : result.curve)
      rows.push_back({cell(c.step), cell(c.loss.total), cell(c.loss.xent), cell(c.loss.logistic),
                      cell(c.loss.spectral)});
    write_csv("loss_curve.csv", {"step", "loss", "xent", "logistic", "spectral"}, rows);
    json r = {{"steps", tc.steps}, {"parameters", model->param_count()}};
    r["final_loss"] = result.curve.empty() ? json(nullptr) : real(result.curve.back().loss.total);
    if (model->positive()) r["tau"] = real(model->tau());
    report["train"] = r;
  }

  const spectra::SpectrumComparison& the_comparison() {
    if (!comparison) {
      const auto& op = the_op("kpca");
      comparison = spectra::compare_spectrum(model_gram(spectra::all_views(op.view_count())), op, cfg.spectra.top);
    }
    return *comparison;
  }

  std::vector<ViewSample> landmarks_from(const std::vector<ViewSample>& pool) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = stream("landmarks");
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cfg.spectra.landmark_fraction * static_cast<double>(pool.size()))));
    std::vector<ViewSample> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[order[i]]);
    return out;
  }

  void stage_kpca() {
    const FiniteTask& t = the_task();
    json r;
    std::vector<Row> rows;
    if (t.is_enumerated()) {
      const auto& c = the_comparison();
      const Vector res = c.residuals();
      for (std::size_t i = 0; i < c.pca.variances.size(); ++i)
        rows.push_back({cell(i), cell(c.pca.variances[i]), cell(c.recovered[i]), cell(c.discrepancy[i]), cell(res[i])});
      write_matrix("kpca_functions.csv", c.functions, "row i: normalized component i on views 0..n-1");
      const auto views = spectra::all_views(t.view_count());
      const spectra::NystromMap nys(model_kernel(), landmarks_from(views));
      r = {{"variances", reals(c.pca.variances)},
           {"spectrum_sum", real(c.spectrum_sum())},
           {"kernel_error", real(c.kernel_error)},
           {"eq4_residuals", reals(res)},
           {"nystrom_landmarks", nys.dim()},
           {"nystrom_error", real(spectra::nystrom_relative_error(nys, views, model_gram(views)))}};
    } else {
      Rng rng = stream("kpca-support");
      std::vector<ViewSample> support;
      Vector weights;
      const std::size_t per = cfg.spectra.samples_per_latent;
      for (std::size_t z = 0; z < t.latent_count(); ++z)
        for (std::size_t k = 0; k < per; ++k) {
          support.push_back(tasklab::sample_view(t, z, rng));
          weights.push_back(t.p_z()[z] / static_cast<double>(per));
        }
      sampled_pca.emplace(model_kernel(), support, weights, cfg.spectra.top);
      const auto& pca = sampled_pca->result();
      Rng mc = stream("kpca-recover");
      for (std::size_t i = 0; i < pca.variances.size(); ++i) {
        const double sigma = std::sqrt(pca.variances[i]);
        auto f = [&](const ViewSample& a) { return sampled_pca->project(a)[i] / sigma; };
        const double rec = spectra::recover_eigenvalue_mc(t, f, support.size(), support.size(), mc);
        const double disc = 2.0 - 2.0 * rec;
        rows.push_back({cell(i), cell(pca.variances[i]), cell(rec), cell(disc),
                        cell(std::abs(disc - (2.0 - 2.0 * pca.variances[i])))});
      }
      const spectra::NystromMap nys(model_kernel(), landmarks_from(support));
      r = {{"variances", reals(pca.variances)},
           {"support", support.size()},
           {"nystrom_landmarks", nys.dim()},
           {"nystrom_error", real(spectra::nystrom_relative_error(nys, support, model_gram(support)))}};
    }
    write_csv("kpca_eigenvalues.csv", {"index", "sigma2", "recovered", "disc", "eq4_residual"}, rows);
    json gaps = json::array();
    const json& var = r["variances"];
    for (std::size_t i = 0; i + 1 < var.size(); ++i)
      if (var[i].is_number() && var[i + 1].is_number()) gaps.push_back(var[i].get<double>() - var[i + 1].get<double>());
    r["eigengaps"] = gaps;
    write_json("kpca.json", r);
    report["kpca"] = r;
  }

  void stage_align() {
    const auto& c = the_comparison();
    write_matrix("alignment.csv", c.alignment, "row i: learned component i, column j: exact eigenfunction j");
    std::vector<Row> groups, scatter;
    for (std::size_t i = 0; i < c.group_alignment.size(); ++i) {
      groups.push_back({cell(i), cell(c.group_alignment[i])});
      const double l = c.pca.variances[i];
      scatter.push_back({cell(i), cell(l), cell(c.discrepancy[i]), cell(2.0 - 2.0 * l)});
    }
    write_csv("group_alignment.csv", {"index", "alignment"}, groups);
    write_csv("scatter.csv", {"index", "lambda_hat", "disc", "reference"}, scatter);
    report["align"] = {{"group_alignment", reals(c.group_alignment)}};
  }

  void stage_neuralef() {
    const FiniteTask& t = the_task();
    const contrastive::InputEncoder enc = cfg.neuralef_encoding ? contrastive::InputEncoder(t, *cfg.neuralef_encoding)
                                                                : contrastive::InputEncoder::automatic(t);
    neuralef::NefConfig nc = cfg.neuralef;
    nc.train.seed = cfg.seed;
    if (nc.population && !t.is_enumerated()) throw ConfigError("config.neuralef.population: needs an enumerated task");
    nef = neuralef::nef_train(t, enc, nc);
    {
      auto out = open("nef.ckpt");
      neuralef::save_checkpoint(out, nef->model);
    }
    record("nef.ckpt");
    std::vector<Row> rows, curve;
    for (const auto& c : nef->curve) curve.push_back({cell(c.step), cell(c.loss)});
    json r = {{"eigenvalues", reals(nef->eigenvalues)}, {"ill_conditioned_steps", nef->ill_conditioned_steps}};
    if (t.is_enumerated()) {
      const auto& op = the_op("neuralef");
      for (std::size_t i = 0; i < nef->eigenvalues.size(); ++i) {
        const auto f = nef->basis.functions.row_span(i);
        rows.push_back({cell(i), cell(nef->eigenvalues[i]), cell(spectra::recover_eigenvalue(op, f)),
                        cell(pospair::discrepancy(op, f))});
      }
      const auto& ex = the_exact("neuralef");
      const DenseMatrix al = spectra::alignment_matrix(nef->basis.functions, ex.functions, op.p_a());
      write_matrix("nef_alignment.csv", al, "row i: learned function i, column j: exact eigenfunction j");
      r["group_alignment"] = reals(spectra::group_alignment(al, ex.eigenvalues));
    } else {
      Rng mc = stream("neuralef-recover");
      for (std::size_t i = 0; i < nef->eigenvalues.size(); ++i) {
        auto f = [&](const ViewSample& a) { return nef->functions(enc, {a})(0, i); };
        const double rec = spectra::recover_eigenvalue_mc(t, f, 4096, 4096, mc);
        rows.push_back({cell(i), cell(nef->eigenvalues[i]), cell(rec), cell(2.0 - 2.0 * rec)});
      }
    }
    write_csv("nef_eigenvalues.csv", {"index", "lambda_hat", "recovered", "disc"}, rows);
    write_csv("nef_curve.csv", {"step", "loss"}, curve);
    report["neuralef"] = r;
  }

  std::vector<std::size_t> minimax_dims(std::size_t n) const {
    if (!cfg.analysis.dims.empty()) return cfg.analysis.dims;
    std::vector<std::size_t> d(n > 0 ? n - 1 : 0);
    std::iota(d.begin(), d.end(), 1);
    return d;
  }

  void stage_minimax() {
    const auto& op = the_op("minimax");
    const auto& a = cfg.analysis;
    json entries = json::array();
    std::vector<Row> rows;
    const Rng base = stream("minimax");
    for (std::size_t d : minimax_dims(op.view_count())) {
      if (d >= op.view_count()) throw ConfigError("config.analysis.dims: d must be below |A|");
      const auto mm = analysis::minimax_verify(op, d, a.eps, a.challengers, base.split(2 * d), opt.threads);
      const auto mx = analysis::invariance_maximin_verify(op, d, a.challengers, base.split(2 * d + 1), opt.threads);
      rows.push_back({cell(d), cell(mm.eigen_worst_case), cell(mm.theoretical), cell(mm.best_challenger()),
                      cell(mx.eigen_value), cell(mx.theoretical), cell(mx.best_challenger())});
      entries.push_back({{"d", d},
                         {"eps", real(a.eps)},
                         {"eigen_worst_case", real(mm.eigen_worst_case)},
                         {"theoretical", real(mm.theoretical)},
                         {"challenger_worst_cases", reals(mm.challenger_worst_cases)},
                         {"maximin_eigen", real(mx.eigen_value)},
                         {"maximin_theoretical", real(mx.theoretical)},
                         {"maximin_challengers", reals(mx.challenger_values)}});
    }
    write_csv("minimax.csv",
              {"d", "eigen_worst_case", "theoretical", "best_challenger", "maximin_eigen", "maximin_theoretical",
               "maximin_best_challenger"},
              rows);
    write_json("minimax.json", entries);
    report["minimax"] = {{"dims", entries.size()}, {"challengers", a.challengers}};
  }

  void stage_bound() {
    const FiniteTask& t = the_task();
    the_op("bound");
    std::vector<analysis::BoundSpec> specs = cfg.analysis.bounds;
    if (specs.empty()) {
      analysis::BoundSpec b;
      b.coefficients = {1.0, 0.5};
      specs.push_back(b);
    }
    json entries = json::array();
    std::size_t within = 0, trials = 0;
    const Rng base = stream("bound");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto r = analysis::gen_bound_check(t, specs[i], base.split(i), opt.threads);
      within += r.trials_within;
      trials += r.excess.size();
      entries.push_back({{"coefficients", specs[i].coefficients},
                         {"d", specs[i].d},
                         {"radius", specs[i].radius},
                         {"n", specs[i].n},
                         {"eps", real(r.eps)},
                         {"beta_norm", real(r.beta_norm)},
                         {"estimation_term", real(r.estimation_term)},
                         {"radius_term", real(r.radius_term)},
                         {"truncation_term", real(r.truncation_term)},
                         {"bound", real(r.bound)},
                         {"excess", reals(r.excess)},
                         {"mean_excess", real(r.mean_excess)},
                         {"trials_within", r.trials_within},
                         {"unconverged", r.unconverged},
                         {"holds", r.holds()}});
    }
    write_json("bound.json", entries);
    report["bound"] = {{"configurations", specs.size()}, {"trials", trials}, {"trials_within", within}};
  }

  void stage_verify_minima() {
    const FiniteTask& t = the_task();
    the_op("verify-minima");
    json entries = json::array();
    bool all = true;
    const Rng base = stream("minima");
    for (auto kind : {analysis::LossKind::xent, analysis::LossKind::logistic, analysis::LossKind::spectral}) {
      const auto r = analysis::loss_minimum_verify(t, kind, cfg.analysis.perturbations, base.split(analysis::to_string(kind)));
      json rescaled = json::array();
      for (const auto& [s, v] : r.rescaled) rescaled.push_back({{"scale", s}, {"loss", real(v)}});
      all = all && r.minimizer_wins();
      entries.push_back({{"loss", analysis::to_string(kind)},
                         {"at_minimizer", real(r.at_minimizer)},
                         {"perturbed", reals(r.perturbed)},
                         {"rescaled", rescaled},
                         {"closed_form", real(r.closed_form)},
                         {"minimizer_wins", r.minimizer_wins()}});
    }
    write_json("minima.json", entries);
    report["verify-minima"] = {{"minimizer_wins", all}};
  }

  void stage_assumption() {
    const FiniteTask& t = the_task();
    the_op("assumption");
    const auto r = analysis::assumption_bound_check(t, cfg.analysis.assumption_trials, stream("assumption"), opt.threads);
    json lhs = json::array(), rhs = json::array();
    for (const auto& s : r.trials) {
      lhs.push_back(real(s.lhs));
      rhs.push_back(real(s.rhs));
    }
    write_json("assumption.json", {{"lhs", lhs}, {"rhs", rhs}, {"max_violation", real(r.max_violation)}});
    report["assumption"] = {{"trials", r.trials.size()}, {"max_violation", real(r.max_violation)}};
  }

  analysis::Representation representation(const std::string& kind) {
    const FiniteTask& t = the_task();
    if (kind == "exact") {
      const auto& basis = the_exact("downstream");
      const std::size_t k = std::min(cfg.spectra.top, basis.size());
      return [&basis, k](const std::vector<ViewSample>& views) {
        DenseMatrix out(views.size(), k);
        for (std::size_t i = 0; i < views.size(); ++i)
          for (std::size_t j = 0; j < k; ++j) out(i, j) = basis.functions(j, views[i].id());
        return out;
      };
    }
    if (kind == "neuralef") {
      if (!nef) throw ConfigError("config.analysis.downstream.representation: neuralef needs the neuralef stage");
      const contrastive::InputEncoder enc = cfg.neuralef_encoding
                                                ? contrastive::InputEncoder(t, *cfg.neuralef_encoding)
                                                : contrastive::InputEncoder::automatic(t);
      return [this, enc](const std::vector<ViewSample>& views) { return nef->functions(enc, views); };
    }
    if (t.is_enumerated()) {
      const auto& c = the_comparison();
      return [&c](const std::vector<ViewSample>& views) {
        DenseMatrix out(views.size(), c.functions.rows());
        for (std::size_t i = 0; i < views.size(); ++i)
          for (std::size_t j = 0; j < c.functions.rows(); ++j) out(i, j) = c.functions(j, views[i].id());
        return out;
      };
    }
    if (!sampled_pca) stage_kpca();
    return [this](const std::vector<ViewSample>& views) {
      const auto& var = sampled_pca->result().variances;
      DenseMatrix out(views.size(), var.size());
      for (std::size_t i = 0; i < views.size(); ++i) {
        const Vector h = sampled_pca->project(views[i]);
        for (std::size_t j = 0; j < var.size(); ++j) out(i, j) = h[j] / std::sqrt(var[j]);
      }
      return out;
    };
  }

  void stage_downstream() {
    const FiniteTask& t = the_task();
    if (!t.labels()) throw ConfigError("config.stages: downstream needs a labeled task");
    const auto& ds = cfg.analysis.downstream;
    const analysis::Representation rep = representation(ds.representation);
    Rng rng = stream("downstream");
    const auto train = analysis::sample_labeled(t, ds.train, rng);
    const auto val = analysis::sample_labeled(t, ds.val, rng);
    const auto test = analysis::sample_labeled(t, ds.test, rng);
    std::vector<std::size_t> dims = ds.dims;
    if (dims.empty()) {
      const std::size_t k = rep({train.views[0]}).cols();
      for (std::size_t d = 1; d <= k; ++d) dims.push_back(d);
    }
    const auto r = analysis::downstream_eval(t, rep, train, val, test, ds.l2, dims);
    json grid = json::array();
    for (const auto& c : r.grid)
      grid.push_back({{"l2", c.l2},
                      {"d", c.d},
                      {"val_squared_error", real(c.val_squared_error)},
                      {"val_top1_error", real(c.val_top1_error)}});
    const json out = {{"representation", ds.representation},
                      {"grid", grid},
                      {"chosen_l2", r.chosen_l2},
                      {"chosen_d", r.chosen_d},
                      {"test_squared_error", real(r.test_squared_error)},
                      {"test_top1_error", real(r.test_top1_error)}};
    write_json("downstream.json", out);
    report["downstream"] = {{"chosen_d", r.chosen_d}, {"test_top1_error", real(r.test_top1_error)}};
  }

  void stage_chain() {
    const FiniteTask& t = the_task();
    const auto& basis = the_exact("chain");
    const auto& c = cfg.analysis.chain;
    if (c.start >= t.view_count()) throw ConfigError("config.analysis.chain.start: no such view");
    const std::size_t k = std::min(c.functions, basis.size());
    Rng rng = stream("chain");
    const auto path = tasklab::sample_chain(t, ViewSample::enumerated(c.start), c.steps, rng);
    std::vector<std::string> columns = {"step", "view", "latent"};
    for (std::size_t j = 0; j < k; ++j) columns.push_back("f" + std::to_string(j + 1));
    std::vector<Row> rows;
    for (std::size_t s = 0; s < path.size(); ++s) {
      Row r = {cell(s), cell(path[s].view.id()), path[s].latent ? cell(*path[s].latent) : std::string("-1")};
      for (std::size_t j = 0; j < k; ++j) r.push_back(cell(basis.functions(j, path[s].view.id())));
      rows.push_back(std::move(r));
    }
    write_csv("chain.csv", columns, rows);
    report["chain"] = {{"steps", c.steps}, {"start", c.start}};
  }
};

Pipeline::Pipeline(ExperimentConfig config, PipelineOptions options)
    : s_(std::make_unique<State>()) {
  s_->cfg = std::move(config);
  s_->opt = std::move(options);
  std::error_code ec;
  fs::create_directories(s_->opt.out, ec);
  if (ec) throw ConfigError("--out: cannot create '" + s_->opt.out.string() + "': " + ec.message());
}

Pipeline::~Pipeline() = default;

void Pipeline::run_stage(const std::string& name) {
  static const std::map<std::string, void (State::*)()> stages = {
      {"task", &State::stage_task},           {"exact", &State::stage_exact},
      {"train", &State::stage_train},         {"kpca", &State::stage_kpca},
      {"align", &State::stage_align},         {"neuralef", &State::stage_neuralef},
      {"minimax", &State::stage_minimax},     {"bound", &State::stage_bound},
      {"verify-minima", &State::stage_verify_minima}, {"assumption", &State::stage_assumption},
      {"downstream", &State::stage_downstream}, {"chain", &State::stage_chain}};
  const auto it = stages.find(name);
  if (it == stages.end()) throw ConfigError("config.stages: unknown stage '" + name + "'");
  try {
    (s_.get()->*(it->second))();
  } catch (const ConfigError&) {
    throw;
  } catch (const CoverageError& e) {
    throw ConfigError(std::string("config.task: ") + e.what());
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void Pipeline::finish() {
  s_->write_json("config.json", config_to_json(s_->cfg));
  json report = s_->report;
  if (std::ifstream in(s_->path("report.json")); in) {
    json old = json::parse(in, nullptr, false);
    if (old.is_object()) {
      old.update(report);
      report = std::move(old);
    }
  }
  s_->write_json("report.json", report);
  // Files written by earlier invocations into the same directory stay listed.
  auto entries = s_->files;
  for (auto& old : read_manifest(s_->opt.out)) {
    const bool rewritten = std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.path == old.path; });
    if (!rewritten && fs::exists(s_->opt.out / old.path)) entries.push_back(std::move(old));
  }
  write_manifest(s_->opt.out, std::move(entries));
}

}  // namespace pairspec::cli
