// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/contrastive/model.hpp"

#include <cmath>

#include "pairspec/errors.hpp"

namespace pairspec::contrastive {

namespace ad = autodiff;

namespace {

constexpr double kScaleClamp = 5.0;

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::linear: return "linear";
    case HeadKind::hypersphere: return "hypersphere";
    case HeadKind::rational_quadratic: return "rational_quadratic";
  }
  return "?";
}

std::string to_string(BiasMode mode) {
  switch (mode) {
    case BiasMode::global: return "global";
    case BiasMode::local: return "local";
    case BiasMode::zero: return "zero";
  }
  return "?";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::silu: return "silu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

std::string to_string(Encoding enc) {
  switch (enc) {
    case Encoding::onehot: return "onehot";
    case Encoding::coords: return "coords";
    case Encoding::counts: return "counts";
  }
  return "?";
}

HeadKind parse_head_kind(const std::string& s) {
  return parse_enum<HeadKind>(s,
                              {{"linear", HeadKind::linear},
                               {"hypersphere", HeadKind::hypersphere},
                               {"rational_quadratic", HeadKind::rational_quadratic}},
                              "head kind");
}

BiasMode parse_bias_mode(const std::string& s) {
  return parse_enum<BiasMode>(s, {{"global", BiasMode::global}, {"local", BiasMode::local}, {"zero", BiasMode::zero}},
                              "bias mode");
}

Activation parse_activation(const std::string& s) {
  return parse_enum<Activation>(
      s, {{"silu", Activation::silu}, {"tanh", Activation::tanh}, {"identity", Activation::identity}}, "activation");
}

Encoding parse_encoding(const std::string& s) {
  return parse_enum<Encoding>(s, {{"onehot", Encoding::onehot}, {"coords", Encoding::coords}, {"counts", Encoding::counts}},
                              "encoding");
}

InputEncoder::InputEncoder(const FiniteTask& task, Encoding encoding) : encoding_(encoding) {
  switch (encoding) {
    case Encoding::onehot:
      if (!task.is_enumerated()) throw ConfigError("onehot encoding needs an enumerated task");
      view_count_ = task.view_count();
      dim_ = view_count_;
      break;
    case Encoding::coords:
      if (!task.is_enumerated() || !task.has_grid()) throw ConfigError("coords encoding needs a grid task");
      view_count_ = task.view_count();
      grid_w_ = task.grid_w();
      grid_h_ = task.grid_h();
      dim_ = 2;
      break;
    case Encoding::counts:
      if (task.is_enumerated()) throw ConfigError("counts encoding needs a multiset task");
      dim_ = task.cell_count();
      draws_ = task.draws();
      break;
  }
}

InputEncoder InputEncoder::automatic(const FiniteTask& task) {
  return InputEncoder(task, task.is_enumerated() ? Encoding::onehot : Encoding::counts);
}

DenseMatrix InputEncoder::encode(const std::vector<ViewSample>& views) const {
  DenseMatrix out(views.size(), dim_);
  auto axis = [](std::size_t i, std::size_t n) {
    return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0 : 0.0;
  };
  for (std::size_t r = 0; r < views.size(); ++r) {
    const ViewSample& v = views[r];
    if (encoding_ == Encoding::counts) {
      if (!v.is_multiset()) throw DimensionError("counts encoding: expected a multiset view");
      for (std::size_t c : v.cells()) {
        if (c >= dim_) throw DimensionError("counts encoding: cell index out of range");
        out(r, c) += 1.0 / static_cast<double>(draws_);
      }
      continue;
    }
    const std::size_t id = v.id();
    if (id >= view_count_) throw DimensionError("encoder: view id " + std::to_string(id) + " out of range");
    if (encoding_ == Encoding::onehot) {
      out(r, id) = 1.0;
    } else {
      out(r, 0) = axis(id % grid_w_, grid_w_);
      out(r, 1) = axis(id / grid_w_, grid_h_);
    }
  }
  return out;
}

DenseMatrix InputEncoder::encode_all() const {
  if (encoding_ == Encoding::counts) throw DimensionError("encode_all: multiset views are not enumerable");
  std::vector<ViewSample> views;
  views.reserve(view_count_);
  for (std::size_t a = 0; a < view_count_; ++a) views.push_back(ViewSample::enumerated(a));
  return encode(views);
}

Mlp::Mlp(std::size_t input_dim, MlpSpec spec, std::size_t output_dim) : spec_(std::move(spec)) {
  if (input_dim == 0 || output_dim == 0) throw DimensionError("mlp: zero input or output width");
  widths_.push_back(input_dim);
  for (std::size_t w : spec_.hidden) {
    if (w == 0) throw DimensionError("mlp: zero hidden width");
    widths_.push_back(w);
  }
  widths_.push_back(output_dim);
}

std::vector<DenseMatrix> Mlp::init(Rng& rng) const {
  std::vector<DenseMatrix> out;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    DenseMatrix w(widths_[l], widths_[l + 1]);
    const double sd = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    for (double& x : w.data()) x = sd * rng.normal();
    out.push_back(std::move(w));
    out.emplace_back(1, widths_[l + 1]);
  }
  return out;
}

Var Mlp::forward(std::span<const Var> params, Var input) const {
  if (input.cols() != input_dim()) throw DimensionError("mlp: input width differs from the first layer");
  Var x = input;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    x = ad::add_row(ad::matmul(x, params[2 * l]), params[2 * l + 1]);
    if (l + 1 == layer_count()) break;
    switch (spec_.activation) {
      case Activation::silu: x = ad::silu(x); break;
      case Activation::tanh: x = ad::tanh(x); break;
      case Activation::identity: break;
    }
  }
  return x;
}

std::size_t head_output_dim(const HeadSpec& head) {
  switch (head.kind) {
    case HeadKind::linear: return head.dim;
    case HeadKind::hypersphere: return head.dim + (head.bias == BiasMode::local ? 1 : 0);
    case HeadKind::rational_quadratic: return head.dim + 1;
  }
  return head.dim;
}

ParamKernel::ParamKernel(ModelSpec spec, std::size_t input_dim, Rng& rng)
    : spec_(std::move(spec)), mlp_(input_dim, spec_.encoder, head_output_dim(spec_.head)) {
  validate();
  params_ = mlp_.init(rng);
  switch (spec_.head.kind) {
    case HeadKind::linear: break;
    case HeadKind::hypersphere:
      params_.emplace_back(1, 1, std::log(spec_.head.tau));
      if (spec_.head.bias == BiasMode::global) params_.emplace_back(1, 1, 0.0);
      break;
    case HeadKind::rational_quadratic: params_.emplace_back(1, 1, std::log(spec_.head.alpha)); break;
  }
  name_params();
}

ParamKernel::ParamKernel(ModelSpec spec, std::size_t input_dim, std::vector<DenseMatrix> params)
    : spec_(std::move(spec)), mlp_(input_dim, spec_.encoder, head_output_dim(spec_.head)), params_(std::move(params)) {
  validate();
  name_params();
  Rng shape_rng(0, "shape");
  ParamKernel reference(spec_, input_dim, shape_rng);
  if (reference.params_.size() != params_.size())
    throw DimensionError("param kernel: expected " + std::to_string(reference.params_.size()) + " tensors");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].rows() != reference.params_[i].rows() || params_[i].cols() != reference.params_[i].cols())
      throw DimensionError("param kernel: tensor '" + names_[i] + "' has the wrong shape");
}

void ParamKernel::validate() const {
  const HeadSpec& h = spec_.head;
  if (h.dim == 0) throw ConfigError("head: dim must be positive");
  if (h.norm_c && !(*h.norm_c > 0.0)) throw ConfigError("head: norm constraint c must be positive");
  if (h.norm_c && h.kind != HeadKind::linear) throw ConfigError("head: norm constraint applies to linear heads only");
  if (!(h.tau > 0.0)) throw ConfigError("head: tau must be positive");
  if (!(h.alpha > 0.0)) throw ConfigError("head: alpha must be positive");
}

void ParamKernel::name_params() {
  names_.clear();
  for (std::size_t l = 0; l < mlp_.layer_count(); ++l) {
    names_.push_back("layer" + std::to_string(l) + ".weight");
    names_.push_back("layer" + std::to_string(l) + ".bias");
  }
  if (spec_.head.kind == HeadKind::hypersphere) {
    names_.push_back("head.log_tau");
    if (spec_.head.bias == BiasMode::global) names_.push_back("head.bias");
  } else if (spec_.head.kind == HeadKind::rational_quadratic) {
    names_.push_back("head.log_alpha");
  }
}

std::size_t ParamKernel::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

double ParamKernel::param_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double x : p.data()) s += x * x;
  return std::sqrt(s);
}

double ParamKernel::tau() const {
  return spec_.head.kind == HeadKind::hypersphere ? std::exp(params_[head_offset()](0, 0)) : 1.0;
}

double ParamKernel::alpha() const {
  return spec_.head.kind == HeadKind::rational_quadratic ? std::exp(params_[head_offset()](0, 0)) : 1.0;
}

double ParamKernel::bias() const {
  if (spec_.head.kind == HeadKind::hypersphere && spec_.head.bias == BiasMode::global)
    return params_[head_offset() + 1](0, 0);
  return 0.0;
}

bool ParamKernel::trainable(std::size_t tensor) const {
  return !(names_.at(tensor) == "head.log_tau" && !spec_.head.learn_tau);
}

std::vector<Var> ParamKernel::attach(Tape& tape, bool with_grad) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    out.push_back(with_grad && trainable(i) ? tape.variable(params_[i]) : tape.constant(params_[i]));
  return out;
}

Embedding ParamKernel::embed(std::span<const Var> params, Var input) const {
  const Var out = mlp_.forward(params, input);
  const HeadSpec& h = spec_.head;
  switch (h.kind) {
    case HeadKind::linear:
      if (h.norm_c) return {ad::scale(ad::row_normalize(out), std::sqrt(*h.norm_c)), std::nullopt};
      return {out, std::nullopt};
    case HeadKind::hypersphere: {
      if (h.bias != BiasMode::local) return {ad::row_normalize(out), std::nullopt};
      const Var s = ad::scale(ad::tanh(ad::col_slice(out, h.dim, 1)), kScaleClamp);
      return {ad::row_normalize(ad::col_slice(out, 0, h.dim)), s};
    }
    case HeadKind::rational_quadratic: {
      const Var s = ad::scale(ad::tanh(ad::col_slice(out, h.dim, 1)), kScaleClamp);
      return {ad::col_slice(out, 0, h.dim), s};
    }
  }
  throw Error("unreachable head kind");
}

std::optional<Var> ParamKernel::bias_penalty(std::span<const Var> params) const {
  if (spec_.head.kind != HeadKind::hypersphere || spec_.head.bias != BiasMode::global) return std::nullopt;
  return ad::square(params[head_offset() + 1]);
}

KernelTerms ParamKernel::pair_kernel(std::span<const Var> params, const Embedding& a, const Embedding& b) const {
  const HeadSpec& h = spec_.head;
  const Var dot = ad::rowdot(a.h, b.h);
  switch (h.kind) {
    case HeadKind::linear: return {dot, std::nullopt};
    case HeadKind::hypersphere: {
      const Var inv_tau = ad::exp(ad::scale(params[head_offset()], -1.0));
      Var logk = ad::mul_scalar(dot, inv_tau);
      if (h.bias == BiasMode::global) logk = ad::add_scalar(logk, params[head_offset() + 1]);
      if (h.bias == BiasMode::local) logk = ad::add(logk, ad::add(*a.log_scale, *b.log_scale));
      return {ad::exp(logk), logk};
    }
    case HeadKind::rational_quadratic: {
      const Var r2 = ad::sub(ad::add(ad::row_sqnorm(a.h), ad::row_sqnorm(b.h)), ad::scale(dot, 2.0));
      const Var log_alpha = params[head_offset()];
      const Var alpha = ad::exp(log_alpha);
      const Var inner = ad::log(ad::add_constant(ad::mul_scalar(r2, ad::scale(ad::exp(ad::scale(log_alpha, -1.0)), 0.5)), 1.0));
      const Var logk = ad::sub(ad::add(*a.log_scale, *b.log_scale), ad::mul_scalar(inner, alpha));
      return {ad::exp(logk), logk};
    }
  }
  throw Error("unreachable head kind");
}

KernelTerms ParamKernel::gram_kernel(std::span<const Var> params, const Embedding& a, const Embedding& b) const {
  const HeadSpec& h = spec_.head;
  Tape& tape = *a.h.tape();
  const Var dot = ad::matmul_nt(a.h, b.h);
  // outer_sum(x, y)_ij = y_j + x_i, which is symmetric whenever x == y.
  auto outer_sum = [&](Var x, Var y) {
    const Var zero = tape.constant(DenseMatrix(x.rows(), y.rows()));
    return ad::add_col(ad::add_row(zero, ad::transpose(y)), x);
  };
  switch (h.kind) {
    case HeadKind::linear: return {dot, std::nullopt};
    case HeadKind::hypersphere: {
      const Var inv_tau = ad::exp(ad::scale(params[head_offset()], -1.0));
      Var logk = ad::mul_scalar(dot, inv_tau);
      if (h.bias == BiasMode::global) logk = ad::add_scalar(logk, params[head_offset() + 1]);
      if (h.bias == BiasMode::local) logk = ad::add(logk, outer_sum(*a.log_scale, *b.log_scale));
      return {ad::exp(logk), logk};
    }
    case HeadKind::rational_quadratic: {
      const Var r2 = ad::sub(outer_sum(ad::row_sqnorm(a.h), ad::row_sqnorm(b.h)), ad::scale(dot, 2.0));
      const Var log_alpha = params[head_offset()];
      const Var alpha = ad::exp(log_alpha);
      const Var inner = ad::log(ad::add_constant(ad::mul_scalar(r2, ad::scale(ad::exp(ad::scale(log_alpha, -1.0)), 0.5)), 1.0));
      const Var logk = ad::sub(outer_sum(*a.log_scale, *b.log_scale), ad::mul_scalar(inner, alpha));
      return {ad::exp(logk), logk};
    }
  }
  throw Error("unreachable head kind");
}

DenseMatrix ParamKernel::embeddings(const DenseMatrix& inputs) const {
  Tape tape;
  const auto p = attach(tape, false);
  return embed(p, tape.constant(inputs)).h.value();
}

Vector ParamKernel::kernel_forward(const DenseMatrix& inputs1, const DenseMatrix& inputs2) const {
  if (inputs1.rows() != inputs2.rows()) throw DimensionError("kernel_forward: batch sizes differ");
  Tape tape;
  const auto p = attach(tape, false);
  const Embedding e1 = embed(p, tape.constant(inputs1));
  const Embedding e2 = embed(p, tape.constant(inputs2));
  const DenseMatrix& k = pair_kernel(p, e1, e2).value.value();
  Vector out(k.rows());
  for (std::size_t i = 0; i < k.rows(); ++i) {
    if (!std::isfinite(k(i, 0))) throw NumericError("kernel_forward: non-finite value at pair " + std::to_string(i));
    out[i] = k(i, 0);
  }
  return out;
}

DenseMatrix ParamKernel::gram(const DenseMatrix& inputs) const {
  Tape tape;
  const auto p = attach(tape, false);
  const Embedding e = embed(p, tape.constant(inputs));
  DenseMatrix g = gram_kernel(p, e, e).value.value();
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      if (!std::isfinite(g(i, j)))
        throw NumericError("gram: non-finite value at pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  return g;
}

}  // namespace pairspec::contrastive
