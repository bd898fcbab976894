// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pairspec/autodiff/tape.hpp"
#include "pairspec/tasklab/task.hpp"

namespace pairspec::contrastive {

using autodiff::Tape;
using autodiff::Var;
using numkit::DenseMatrix;
using numkit::Rng;
using numkit::Vector;
using tasklab::FiniteTask;
using tasklab::ViewSample;

enum class Activation { silu, tanh, identity };

enum class Encoding {
  onehot,  // enumerated views, one indicator per view
  coords,  // enumerated grid views, (x, y) scaled to [-1, 1]
  counts,  // multiset views, count grid divided by k
};

/// Maps views to real input rows for an encoder.
class InputEncoder {
 public:
  InputEncoder(const FiniteTask& task, Encoding encoding);
  /// onehot for enumerated tasks, counts for multiset tasks.
  static InputEncoder automatic(const FiniteTask& task);

  Encoding encoding() const noexcept { return encoding_; }
  std::size_t dim() const noexcept { return dim_; }
  DenseMatrix encode(const std::vector<ViewSample>& views) const;
  /// Rows for views 0..n-1 of an enumerated task.
  DenseMatrix encode_all() const;

 private:
  Encoding encoding_;
  std::size_t dim_ = 0;
  std::size_t view_count_ = 0;
  std::size_t grid_w_ = 0, grid_h_ = 0;
  std::size_t draws_ = 0;
};

struct MlpSpec {
  std::vector<std::size_t> hidden;
  Activation activation = Activation::silu;
};

/// Parameter tensors are stored externally; layer l uses entries 2l (weights,
/// in x out) and 2l + 1 (bias, 1 x out).
class Mlp {
 public:
  Mlp(std::size_t input_dim, MlpSpec spec, std::size_t output_dim);

  std::size_t input_dim() const noexcept { return widths_.front(); }
  std::size_t output_dim() const noexcept { return widths_.back(); }
  std::size_t layer_count() const noexcept { return widths_.size() - 1; }
  const MlpSpec& spec() const noexcept { return spec_; }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }

  /// Scaled-normal weights (variance 1 / fan_in), zero biases.
  std::vector<DenseMatrix> init(Rng& rng) const;
  Var forward(std::span<const Var> params, Var input) const;

 private:
  std::vector<std::size_t> widths_;
  MlpSpec spec_;
};

enum class HeadKind { linear, hypersphere, rational_quadratic };
enum class BiasMode { global, local, zero };

struct HeadSpec {
  HeadKind kind = HeadKind::linear;
  std::size_t dim = 8;
  /// Linear head only: rescale every embedding to squared norm c.
  std::optional<double> norm_c;
  double tau = 0.5;
  bool learn_tau = true;
  BiasMode bias = BiasMode::global;
  double alpha = 1.0;
};

struct ModelSpec {
  MlpSpec encoder{{64, 64}, Activation::silu};
  HeadSpec head;
};

std::string to_string(HeadKind kind);
std::string to_string(BiasMode mode);
std::string to_string(Activation act);
std::string to_string(Encoding enc);
HeadKind parse_head_kind(const std::string& s);
BiasMode parse_bias_mode(const std::string& s);
Activation parse_activation(const std::string& s);
Encoding parse_encoding(const std::string& s);

/// Embeddings of a batch. `log_scale` is the per-example log-scale column of
/// the local-bias hypersphere head and the rational quadratic head.
struct Embedding {
  Var h;
  std::optional<Var> log_scale;
};

/// Kernel values on a tape; `log_value` is present for heads that are positive by construction.
struct KernelTerms {
  Var value;
  std::optional<Var> log_value;
};

/// Encoder MLP plus kernel head with all trainable tensors.
class ParamKernel {
 public:
  ParamKernel(ModelSpec spec, std::size_t input_dim, Rng& rng);
  ParamKernel(ModelSpec spec, std::size_t input_dim, std::vector<DenseMatrix> params);

  const ModelSpec& spec() const noexcept { return spec_; }
  const Mlp& encoder() const noexcept { return mlp_; }
  std::size_t input_dim() const noexcept { return mlp_.input_dim(); }
  const std::vector<DenseMatrix>& params() const noexcept { return params_; }
  std::vector<DenseMatrix>& params() noexcept { return params_; }
  const std::vector<std::string>& param_names() const noexcept { return names_; }
  std::size_t param_count() const;
  double param_norm() const;
  /// False for the temperature when it is held fixed.
  bool trainable(std::size_t tensor) const;
  bool positive() const noexcept { return spec_.head.kind != HeadKind::linear; }

  double tau() const;
  double alpha() const;
  /// Global bias b, 0 for other bias modes.
  double bias() const;

  /// Pushes every tensor onto the tape; trainable ones become variables when `with_grad`.
  std::vector<Var> attach(Tape& tape, bool with_grad) const;
  Embedding embed(std::span<const Var> params, Var input) const;
  /// Row-wise kernel between matching rows of two embedding batches (n x 1).
  KernelTerms pair_kernel(std::span<const Var> params, const Embedding& a, const Embedding& b) const;
  /// Kernel between every row of `a` and every row of `b` (na x nb).
  KernelTerms gram_kernel(std::span<const Var> params, const Embedding& a, const Embedding& b) const;
  /// Squared bias for the regularizer (1x1), absent unless the bias is a global parameter.
  std::optional<Var> bias_penalty(std::span<const Var> params) const;

  /// Embedding rows h(a) for pre-encoded inputs.
  DenseMatrix embeddings(const DenseMatrix& inputs) const;
  /// K_hat(a1_i, a2_i); throws NumericError naming the first non-finite pair.
  Vector kernel_forward(const DenseMatrix& inputs1, const DenseMatrix& inputs2) const;
  DenseMatrix gram(const DenseMatrix& inputs) const;

 private:
  std::size_t head_offset() const noexcept { return 2 * mlp_.layer_count(); }
  void name_params();
  void validate() const;

  ModelSpec spec_;
  Mlp mlp_;
  std::vector<DenseMatrix> params_;
  std::vector<std::string> names_;
};

/// Encoder output width for a head.
std::size_t head_output_dim(const HeadSpec& head);

}  // namespace pairspec::contrastive
