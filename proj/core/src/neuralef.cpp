// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/neuralef/neuralef.hpp"

#include <cmath>
#include <istream>
#include <limits>

#include "checkpoint_format.hpp"
#include "pairspec/errors.hpp"
#include "pairspec/numkit/matrix_io.hpp"

namespace pairspec::neuralef {

namespace ad = autodiff;
using autodiff::Tape;
using autodiff::Var;

namespace {

constexpr double kWeakDiagonal = 1e-6;

// F with column j multiplied by s(0, j).
Var scale_columns(Tape& tape, Var f, Var s) {
  return ad::hadamard(f, ad::add_row(tape.constant(DenseMatrix(f.rows(), f.cols())), s));
}

// 1 x J row of 1 / sqrt(mean_rows f^2).
Var inverse_rms(Var f) {
  const Var meansq = ad::scale(ad::transpose(ad::row_sqnorm(ad::transpose(f))), 1.0 / static_cast<double>(f.rows()));
  return ad::exp(ad::scale(ad::log(meansq), -0.5));
}

// Assembles the objective from R (all live) and C (earlier function frozen in
// entry (i, j), i < j). Only the diagonal of R and the strict upper triangle
// of C enter the loss.
Var assemble(Var r, Var c, NefLossValue& out) {
  const std::size_t j = r.rows();
  out.r = r.value();
  DenseMatrix diag(j, j), penalty(j, j);
  for (std::size_t i = 0; i < j; ++i) {
    diag(i, i) = -1.0;
    const double rii = out.r(i, i);
    if (!(rii >= kWeakDiagonal)) out.ill_conditioned.push_back(i);
    for (std::size_t k = i + 1; k < j; ++k) penalty(i, k) = 1.0 / std::max(rii, kWeakDiagonal);
  }
  const Var loss = ad::add(ad::weighted_sum(r, diag), ad::weighted_sum(ad::square(c), penalty));
  out.loss = loss.scalar();
  return loss;
}

// x^T y and its frozen-left counterpart.
std::pair<Var, Var> cross(Var x, Var y) {
  return {ad::matmul(ad::transpose(x), y), ad::matmul(ad::transpose(ad::stop_gradient(x)), y)};
}

Var sampled_objective(Tape& tape, Var f1, Var f2, Var fm, double w, NefLossValue& out) {
  if (f1.rows() == 0 || fm.rows() == 0 || f1.rows() != f2.rows() || f1.cols() != fm.cols() || f2.cols() != fm.cols())
    throw DimensionError("nef_loss: need matching non-empty pair and marginal batches");
  const Var s = inverse_rms(fm);
  const Var a = scale_columns(tape, f1, s), b = scale_columns(tape, f2, s), m = scale_columns(tape, fm, s);
  const double n = static_cast<double>(f1.rows()), nm = static_cast<double>(fm.rows());
  const auto [ab, ab_sg] = cross(a, b);
  const auto [ba, ba_sg] = cross(b, a);
  const auto [mm, mm_sg] = cross(m, m);
  const double wp = 0.5 * (1.0 - w) / n, wm = w / nm;
  const Var r = ad::add(ad::scale(ad::add(ab, ba), wp), ad::scale(mm, wm));
  const Var c = ad::add(ad::scale(ad::add(ab_sg, ba_sg), wp), ad::scale(mm_sg, wm));
  return assemble(r, c, out);
}

Var population_objective(Tape& tape, Var f, const pospair::PosPairOperator& op, double w, NefLossValue& out) {
  const Var joint = tape.constant(op.joint());
  const Var marginal = tape.constant(DenseMatrix::diagonal(op.p_a()));
  const Var meansq = ad::transpose(ad::rowdot(ad::transpose(f), ad::transpose(ad::matmul(marginal, f))));
  const Var g = scale_columns(tape, f, ad::exp(ad::scale(ad::log(meansq), -0.5)));
  const auto [pg, pg_sg] = cross(g, ad::matmul(joint, g));
  const auto [dg, dg_sg] = cross(g, ad::matmul(marginal, g));
  const Var r = ad::add(ad::scale(pg, 1.0 - w), ad::scale(dg, w));
  const Var c = ad::add(ad::scale(pg_sg, 1.0 - w), ad::scale(dg_sg, w));
  return assemble(r, c, out);
}

void check_mix(double w) {
  if (!(w > 0.0 && w <= 1.0)) throw ConfigError("neuralef: mixture weight must lie in (0, 1]");
}

}  // namespace

NefModel::NefModel(std::size_t input_dim, MlpSpec spec, std::size_t count, Rng& rng)
    : mlp_(input_dim, std::move(spec), count), params_(mlp_.init(rng)) {}

NefModel::NefModel(std::size_t input_dim, MlpSpec spec, std::size_t count, std::vector<DenseMatrix> params)
    : mlp_(input_dim, std::move(spec), count), params_(std::move(params)) {
  const auto& w = mlp_.widths();
  if (params_.size() != 2 * mlp_.layer_count()) throw DimensionError("nef model: wrong tensor count");
  for (std::size_t l = 0; l < mlp_.layer_count(); ++l)
    if (params_[2 * l].rows() != w[l] || params_[2 * l].cols() != w[l + 1] || params_[2 * l + 1].rows() != 1 ||
        params_[2 * l + 1].cols() != w[l + 1])
      throw DimensionError("nef model: layer " + std::to_string(l) + " has the wrong shape");
}

std::vector<std::string> NefModel::param_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < mlp_.layer_count(); ++l) {
    names.push_back("layer" + std::to_string(l) + ".weight");
    names.push_back("layer" + std::to_string(l) + ".bias");
  }
  return names;
}

double NefModel::param_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double x : p.data()) s += x * x;
  return std::sqrt(s);
}

DenseMatrix NefModel::outputs(const DenseMatrix& inputs) const {
  Tape tape;
  std::vector<Var> p;
  for (const auto& t : params_) p.push_back(tape.constant(t));
  return mlp_.forward(p, tape.constant(inputs)).value();
}

NefLossValue nef_loss(const DenseMatrix& first, const DenseMatrix& second, const DenseMatrix& marginal, double mix) {
  check_mix(mix);
  Tape tape;
  NefLossValue out;
  sampled_objective(tape, tape.constant(first), tape.constant(second), tape.constant(marginal), mix, out);
  return out;
}

void NefConfig::validate() const {
  if (count == 0) throw ConfigError("neuralef: need at least one function");
  check_mix(mix);
  if (!(ema >= 0.0 && ema < 1.0)) throw ConfigError("neuralef: ema decay must lie in [0, 1)");
  if (!population && train.batch < 2) throw ConfigError("neuralef: batch must be at least 2");
  if (!population && holdout == 0) throw ConfigError("neuralef: holdout must be positive");
  train.validate(contrastive::LossSpec{});
}

NefObjective::NefObjective(FiniteTask task, InputEncoder encoder, double mix, bool population)
    : task_(std::move(task)), encoder_(std::move(encoder)), mix_(mix), population_(population) {
  check_mix(mix_);
  if (!population_) return;
  if (!task_.is_enumerated()) throw ConfigError("neuralef: population mode needs an enumerated task");
  op_ = pospair::PosPairOperator::build_exact(task_);
  all_inputs_ = encoder_.encode_all();
}

NefBatch NefObjective::sample(std::size_t pairs, Rng& rng) const {
  NefBatch b;
  if (population_) return b;
  for (std::size_t i = 0; i < pairs; ++i) b.positives.push_back(tasklab::sample_pair(task_, rng));
  for (std::size_t i = 0; i < pairs; ++i) b.marginals.push_back(tasklab::sample_marginal_view(task_, rng));
  return b;
}

NefLossValue NefObjective::evaluate(const NefModel& model, const NefBatch& batch, std::vector<DenseMatrix>* grads) const {
  Tape tape;
  std::vector<Var> p;
  for (const auto& t : model.params()) p.push_back(grads ? tape.variable(t) : tape.constant(t));
  NefLossValue out;
  Var loss;
  if (population_) {
    loss = population_objective(tape, model.encoder().forward(p, tape.constant(all_inputs_)), *op_, mix_, out);
  } else {
    std::vector<ViewSample> first, second;
    for (const auto& pp : batch.positives) {
      first.push_back(pp.first);
      second.push_back(pp.second);
    }
    auto run = [&](const std::vector<ViewSample>& v) {
      return model.encoder().forward(p, tape.constant(encoder_.encode(v)));
    };
    loss = sampled_objective(tape, run(first), run(second), run(batch.marginals), mix_, out);
  }
  if (grads) {
    tape.backward(loss);
    grads->clear();
    for (const Var& v : p) grads->push_back(tape.grad(v));
  }
  return out;
}

DenseMatrix NefResult::functions(const InputEncoder& encoder, const std::vector<ViewSample>& views) const {
  DenseMatrix f = model.outputs(encoder.encode(views));
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = 0; j < f.cols(); ++j) f(i, j) *= scales[j];
  return f;
}

NefResult nef_train(const FiniteTask& task, const InputEncoder& encoder, const NefConfig& cfg) {
  cfg.validate();
  const NefObjective objective(task, encoder, cfg.mix, cfg.population);
  Rng init_rng(cfg.train.seed, "neuralef-init");
  NefResult result{NefModel(encoder.dim(), cfg.encoder, cfg.count, init_rng), {}, {}, {}, {}, {}, 0};
  NefModel& model = result.model;
  contrastive::Adam adam(model.params(), cfg.train.adam, cfg.train.steps);
  Rng rng(cfg.train.seed, "neuralef-train");
  std::vector<DenseMatrix> grads;
  for (std::size_t step = 0; step < cfg.train.steps; ++step) {
    const NefBatch batch = objective.sample(cfg.train.batch, rng);
    const NefLossValue v = objective.evaluate(model, batch, &grads);
    bool finite = std::isfinite(v.loss);
    for (auto& g : grads) {
      finite = finite && g.all_finite();
      g *= 2.0;  // training objective uses the unscaled sum of the two mixture terms
    }
    if (!finite)
      throw NumericError("neuralef training diverged at step " + std::to_string(step) + " (parameter norm " +
                         numkit::format_real(model.param_norm()) + ")");
    if (!v.ill_conditioned.empty()) ++result.ill_conditioned_steps;
    result.r_running = step == 0 ? v.r : cfg.ema * result.r_running + (1.0 - cfg.ema) * v.r;
    result.curve.push_back({step, v.loss});
    adam.step(model.params(), grads);
  }
  if (result.r_running.empty()) result.r_running = objective.evaluate(model, objective.sample(cfg.train.batch, rng)).r;

  result.eigenvalues.resize(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i)
    result.eigenvalues[i] = cfg.mix < 1.0 ? (result.r_running(i, i) - cfg.mix) / (1.0 - cfg.mix)
                                          : std::numeric_limits<double>::quiet_NaN();

  // Unit E_p[f^2] under the exact marginal (population) or a held-out sample.
  result.scales.assign(cfg.count, 0.0);
  if (cfg.population) {
    const DenseMatrix f = model.outputs(encoder.encode_all());
    const Vector p = pospair::PosPairOperator::build_exact(task).p_a();
    for (std::size_t j = 0; j < cfg.count; ++j)
      for (std::size_t a = 0; a < p.size(); ++a) result.scales[j] += p[a] * f(a, j) * f(a, j);
  } else {
    Rng hold(cfg.train.seed, "neuralef-holdout");
    std::vector<ViewSample> views;
    for (std::size_t i = 0; i < cfg.holdout; ++i) views.push_back(tasklab::sample_marginal_view(task, hold));
    const DenseMatrix f = model.outputs(encoder.encode(views));
    for (std::size_t j = 0; j < cfg.count; ++j) {
      for (std::size_t i = 0; i < f.rows(); ++i) result.scales[j] += f(i, j) * f(i, j);
      result.scales[j] /= static_cast<double>(f.rows());
    }
  }
  for (double& s : result.scales) s = s > 0.0 ? 1.0 / std::sqrt(s) : 0.0;

  if (task.is_enumerated()) {
    const auto views = spectra::all_views(task.view_count());
    const DenseMatrix raw = result.functions(encoder, views);
    // Same sign convention as spectra::normalize_signs, folded into the scales.
    for (std::size_t j = 0; j < cfg.count; ++j) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < raw.rows(); ++a)
        if (std::abs(raw(a, j)) > std::abs(raw(best, j))) best = a;
      if (raw(best, j) < 0.0) result.scales[j] = -result.scales[j];
    }
    result.basis = {result.functions(encoder, views).transpose(), result.eigenvalues};
  }
  return result;
}

void save_checkpoint(std::ostream& out, const NefModel& model) {
  nlohmann::json header = {{"kind", "neuralef"},
                           {"input_dim", model.input_dim()},
                           {"count", model.count()},
                           {"encoder",
                            {{"hidden", model.encoder().spec().hidden},
                             {"activation", contrastive::to_string(model.encoder().spec().activation)}}}};
  detail::write_checkpoint(out, std::move(header), model.param_names(), model.params());
}

NefModel load_nef_checkpoint(std::istream& in) {
  auto data = detail::read_checkpoint(in, "neuralef");
  try {
    MlpSpec spec;
    spec.hidden = data.header.at("encoder").at("hidden").get<std::vector<std::size_t>>();
    spec.activation = contrastive::parse_activation(data.header.at("encoder").at("activation").get<std::string>());
    return NefModel(data.header.at("input_dim").get<std::size_t>(), spec, data.header.at("count").get<std::size_t>(),
                    std::move(data.tensors));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad neuralef description: ") + e.what());
  }
}

}  // namespace pairspec::neuralef
