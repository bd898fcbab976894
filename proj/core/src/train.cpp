// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/contrastive/train.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>

#include "checkpoint_format.hpp"
#include "pairspec/errors.hpp"
#include "pairspec/numkit/matrix_io.hpp"

namespace pairspec::contrastive {

using nlohmann::json;

void TrainConfig::validate(const LossSpec& loss) const {
  if (batch == 0) throw ConfigError("train: batch must be positive");
  if (loss.xent > 0.0 && !loss.population && batch < 2) throw ConfigError("train: xent needs a batch of at least 2");
  if (!(adam.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("train: Adam eps must be positive");
}

Adam::Adam(const std::vector<DenseMatrix>& params, AdamConfig cfg, std::size_t total_steps)
    : cfg_(cfg), total_(std::max<std::size_t>(total_steps, 1)) {
  for (const auto& p : params) {
    m_.emplace_back(p.rows(), p.cols());
    v_.emplace_back(p.rows(), p.cols());
  }
}

double Adam::learning_rate() const {
  return cfg_.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t_) / static_cast<double>(total_)));
}

void Adam::step(std::vector<DenseMatrix>& params, const std::vector<DenseMatrix>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw DimensionError("adam: tensor count changed");
  const double lr = learning_rate();
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].data();
    auto& m = m_[k].data();
    auto& v = v_[k].data();
    const auto& g = grads[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

TrainResult train(const Objective& objective, ParamKernel init, const TrainConfig& cfg) {
  cfg.validate(objective.spec());
  TrainResult result{std::move(init), {}};
  ParamKernel& model = result.model;
  Adam adam(model.params(), cfg.adam, cfg.steps);
  Rng rng(cfg.seed, "train");
  std::vector<DenseMatrix> grads;
  result.curve.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Batch batch = objective.sample(cfg.batch, rng);
    const LossValue loss = objective.evaluate(model, batch, &grads);
    bool finite = std::isfinite(loss.total);
    for (const auto& g : grads) finite = finite && g.all_finite();
    if (!finite)
      throw NumericError("training diverged at step " + std::to_string(step) + " (loss " +
                         numkit::format_real(loss.total) + ", parameter norm " +
                         numkit::format_real(model.param_norm()) + ")");
    result.curve.push_back({step, loss});
    adam.step(model.params(), grads);
  }
  return result;
}

Vector flatten(const std::vector<DenseMatrix>& tensors) {
  Vector out;
  for (const auto& t : tensors) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

void unflatten(const Vector& flat, std::vector<DenseMatrix>& tensors) {
  std::size_t pos = 0;
  for (auto& t : tensors) {
    if (pos + t.size() > flat.size()) throw DimensionError("unflatten: vector too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), t.size(), t.data().begin());
    pos += t.size();
  }
  if (pos != flat.size()) throw DimensionError("unflatten: vector too long");
}

double grad_check(const std::function<double(const Vector&)>& loss, const Vector& x, const Vector& grad, double h) {
  if (grad.size() != x.size()) throw DimensionError("grad_check: gradient length differs from parameters");
  if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");
  double worst = 0.0;
  Vector probe = x;
  auto central = [&](std::size_t i, double step) {
    probe[i] = x[i] + step;
    const double up = loss(probe);
    probe[i] = x[i] - step;
    const double down = loss(probe);
    probe[i] = x[i];
    return (up - down) / (2.0 * step);
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fd = (4.0 * central(i, 0.5 * h) - central(i, h)) / 3.0;
    worst = std::max(worst, std::abs(grad[i] - fd) / std::max(std::abs(grad[i]), 1e-6));
  }
  return worst;
}

double grad_check(const ParamKernel& model, const Objective& objective, const Batch& batch, double h) {
  std::vector<DenseMatrix> grads;
  objective.evaluate(model, batch, &grads);
  // Only trainable tensors are probed; frozen ones have no reverse-mode gradient by design.
  std::vector<std::size_t> live;
  std::vector<DenseMatrix> live_grads, live_params;
  for (std::size_t k = 0; k < grads.size(); ++k)
    if (model.trainable(k)) {
      live.push_back(k);
      live_grads.push_back(grads[k]);
      live_params.push_back(model.params()[k]);
    }
  ParamKernel probe = model;
  auto loss = [&](const Vector& flat) {
    std::vector<DenseMatrix> tensors = live_params;
    unflatten(flat, tensors);
    for (std::size_t i = 0; i < live.size(); ++i) probe.params()[live[i]] = tensors[i];
    return objective.evaluate(probe, batch).total;
  };
  return grad_check(loss, flatten(live_params), flatten(live_grads), h);
}

namespace {

json spec_to_json(const ModelSpec& spec, std::size_t input_dim) {
  const HeadSpec& h = spec.head;
  json head = {{"kind", to_string(h.kind)}, {"dim", h.dim},       {"tau", h.tau},
               {"learn_tau", h.learn_tau},  {"bias", to_string(h.bias)}, {"alpha", h.alpha}};
  head["norm_c"] = h.norm_c ? json(*h.norm_c) : json(nullptr);
  return {{"input_dim", input_dim},
          {"encoder", {{"hidden", spec.encoder.hidden}, {"activation", to_string(spec.encoder.activation)}}},
          {"head", head}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.encoder.hidden = j.at("encoder").at("hidden").get<std::vector<std::size_t>>();
  spec.encoder.activation = parse_activation(j.at("encoder").at("activation").get<std::string>());
  const json& h = j.at("head");
  spec.head.kind = parse_head_kind(h.at("kind").get<std::string>());
  spec.head.dim = h.at("dim").get<std::size_t>();
  spec.head.tau = h.at("tau").get<double>();
  spec.head.learn_tau = h.at("learn_tau").get<bool>();
  spec.head.bias = parse_bias_mode(h.at("bias").get<std::string>());
  spec.head.alpha = h.at("alpha").get<double>();
  if (!h.at("norm_c").is_null()) spec.head.norm_c = h.at("norm_c").get<double>();
  return spec;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ParamKernel& model) {
  json header = spec_to_json(model.spec(), model.input_dim());
  header["kind"] = "param_kernel";
  detail::write_checkpoint(out, std::move(header), model.param_names(), model.params());
}

ParamKernel load_checkpoint(std::istream& in) {
  auto data = detail::read_checkpoint(in, "param_kernel");
  try {
    return ParamKernel(spec_from_json(data.header), data.header.at("input_dim").get<std::size_t>(),
                       std::move(data.tensors));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad model description: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const ParamKernel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot open '" + path + "' for writing");
  save_checkpoint(out, model);
}

ParamKernel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open '" + path + "'");
  return load_checkpoint(in);
}

void write_loss_curve(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "step,loss,xent,logistic,spectral\n";
  for (const auto& c : curve)
    out << c.step << ',' << numkit::format_real(c.loss.total) << ',' << numkit::format_real(c.loss.xent) << ','
        << numkit::format_real(c.loss.logistic) << ',' << numkit::format_real(c.loss.spectral) << '\n';
}

}  // namespace pairspec::contrastive
