// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "pairspec/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "pairspec/contrastive/losses.hpp"
#include "pairspec/errors.hpp"
#include "pairspec/numkit/linalg.hpp"
#include "pairspec/numkit/parallel.hpp"

namespace pairspec::analysis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Eigenvalues of M this close to 1 count as exactly invariant directions.
constexpr double kInvariantTol = 1e-9;
constexpr double kCoverTol = 1e-7;

// Spectral data of M = D^-1/2 P D^-1/2 shared by every subspace evaluation.
// Subspaces are handled as orthonormal columns U in the D^1/2-scaled space,
// where E_p-orthonormal functions become Euclidean-orthonormal vectors.
struct Geometry {
  std::size_t n = 0;
  Vector sqrt_p;
  numkit::EigDecomposition eig;
  DenseMatrix invariant;  // n x k0 eigenvectors with eigenvalue 1
  DenseMatrix gap_pinv_sqrt;  // pseudo-inverse square root of I - M
  DenseMatrix gap;  // I - M

  explicit Geometry(const PosPairOperator& op) : n(op.view_count()), sqrt_p(n) {
    for (std::size_t i = 0; i < n; ++i) sqrt_p[i] = std::sqrt(op.p_a()[i]);
    eig = numkit::sym_eigh(op.symmetric());
    std::size_t k0 = 0;
    while (k0 < n && eig.eigenvalues[k0] >= 1.0 - kInvariantTol) ++k0;
    invariant = eig.eigenvectors.block(0, 0, n, k0);
    gap_pinv_sqrt = DenseMatrix(n, n);
    gap = DenseMatrix::identity(n) - op.symmetric();
    for (std::size_t k = k0; k < n; ++k) {
      const double s = 1.0 / std::sqrt(std::max(1.0 - eig.eigenvalues[k], kInvariantTol));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          gap_pinv_sqrt(i, j) += s * eig.eigenvectors(i, k) * eig.eigenvectors(j, k);
    }
  }

  std::size_t invariant_dim() const { return invariant.cols(); }

  // Orthonormal columns spanning D^1/2 times the row span of `functions`.
  DenseMatrix scaled_basis(const DenseMatrix& functions) const {
    if (functions.cols() != n) throw DimensionError("subspace: functions must have one value per view");
    DenseMatrix scaled = functions.transpose();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < scaled.cols(); ++j) scaled(i, j) *= sqrt_p[i];
    return orthonormal(scaled);
  }

  static DenseMatrix orthonormal(const DenseMatrix& columns) {
    if (columns.cols() == 0) return columns;
    const Vector ones(columns.rows(), 1.0);
    return numkit::weighted_orthonormalize(columns, ones);
  }

  double worst_case(const DenseMatrix& u, double eps) const {
    for (std::size_t k = 0; k < invariant.cols(); ++k) {
      const Vector v = invariant.column_vector(k);
      Vector r = v;
      if (u.cols() > 0) {
        const Vector c = numkit::matvec_t(u, v);
        const Vector back = numkit::matvec(u, c);
        for (std::size_t i = 0; i < n; ++i) r[i] -= back[i];
      }
      if (numkit::norm2(r) > kCoverTol) return kInf;
    }
    if (eps == 0.0) return 0.0;
    // lambda_max of S (I - U U^T) S with S the pseudo-inverse square root of I - M.
    DenseMatrix a = matmul(gap_pinv_sqrt, gap_pinv_sqrt);
    if (u.cols() > 0) {
      const DenseMatrix su = matmul(gap_pinv_sqrt, u);
      a -= numkit::matmul_nt(su, su);
    }
    return 0.5 * eps * std::max(0.0, numkit::sym_max_eigenvalue(a));
  }

  double max_discrepancy(const DenseMatrix& u) const {
    if (u.cols() == 0) return 0.0;
    return 2.0 * numkit::sym_max_eigenvalue(numkit::matmul_tn(u, matmul(gap, u)));
  }

  DenseMatrix top(std::size_t d) const { return eig.eigenvectors.block(0, 0, n, d); }

  // `keep` invariant directions followed by Gaussian columns, orthonormalized.
  DenseMatrix random_basis(std::size_t d, std::size_t keep, Rng& rng) const {
    DenseMatrix cols(n, d);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < n; ++i) cols(i, j) = j < keep ? invariant(i, j) : rng.normal();
    return orthonormal(cols);
  }
};

void check_eps(double eps) {
  if (!(eps >= 0.0)) throw DomainError("invariance budget must be nonnegative");
}

double best_of(const std::vector<double>& values) {
  return values.empty() ? kInf : *std::min_element(values.begin(), values.end());
}

}  // namespace

double subspace_worst_case(const PosPairOperator& op, const DenseMatrix& functions, double eps) {
  check_eps(eps);
  const Geometry geo(op);
  return geo.worst_case(geo.scaled_basis(functions), eps);
}

double subspace_max_discrepancy(const PosPairOperator& op, const DenseMatrix& functions) {
  const Geometry geo(op);
  return geo.max_discrepancy(geo.scaled_basis(functions));
}

double MinimaxReport::best_challenger() const { return best_of(challenger_worst_cases); }
double MaximinReport::best_challenger() const { return best_of(challenger_values); }

MinimaxReport minimax_verify(const PosPairOperator& op, std::size_t d, double eps, std::size_t challengers,
                             const Rng& rng, std::size_t threads) {
  check_eps(eps);
  const Geometry geo(op);
  if (d == 0 || d >= geo.n) throw DimensionError("minimax_verify: need 1 <= d < |A|");
  MinimaxReport report;
  report.d = d;
  report.eps = eps;
  report.eigen_worst_case = geo.worst_case(geo.top(d), eps);
  const double next = geo.eig.eigenvalues[d];
  report.theoretical = next >= 1.0 - kInvariantTol ? kInf : eps / (2.0 * (1.0 - next));
  report.challenger_worst_cases.assign(challengers, 0.0);
  const std::size_t keep = std::min(d, geo.invariant_dim());
  numkit::parallel_for(challengers, threads, [&](std::size_t i) {
    Rng local = rng.split(i);
    report.challenger_worst_cases[i] = geo.worst_case(geo.random_basis(d, keep, local), eps);
  });
  return report;
}

MaximinReport invariance_maximin_verify(const PosPairOperator& op, std::size_t d, std::size_t challengers,
                                        const Rng& rng, std::size_t threads) {
  const Geometry geo(op);
  if (d == 0 || d > geo.n) throw DimensionError("invariance_maximin_verify: need 1 <= d <= |A|");
  MaximinReport report;
  report.d = d;
  report.eigen_value = geo.max_discrepancy(geo.top(d));
  report.theoretical = 2.0 * (1.0 - geo.eig.eigenvalues[d - 1]);
  report.challenger_values.assign(challengers, 0.0);
  numkit::parallel_for(challengers, threads, [&](std::size_t i) {
    Rng local = rng.split(i);
    report.challenger_values[i] = geo.max_discrepancy(geo.random_basis(d, 0, local));
  });
  return report;
}

// ---- Smoothness assumption ----

namespace {

void check_labels(const PosPairOperator& op, std::span<const double> g, const LabelLaw& labels) {
  if (g.size() != op.view_count()) throw DimensionError("assumption: g needs one value per view");
  if (labels.law.rows() != op.latent_count() || labels.law.cols() != labels.values.size())
    throw DimensionError("assumption: label law must be |Z| x values");
}

}  // namespace

AssumptionSides assumption_sides(const PosPairOperator& op, std::span<const double> g, const LabelLaw& labels) {
  check_labels(op, g, labels);
  AssumptionSides s;
  s.lhs = pospair::discrepancy(op, g);
  const DenseMatrix& cond = op.cond();
  for (std::size_t z = 0; z < op.latent_count(); ++z) {
    double inner = 0.0;
    for (std::size_t a = 0; a < g.size(); ++a) {
      if (cond(z, a) == 0.0) continue;
      double e = 0.0;
      for (std::size_t k = 0; k < labels.values.size(); ++k) {
        const double r = g[a] - labels.values[k];
        e += labels.law(z, k) * r * r;
      }
      inner += cond(z, a) * e;
    }
    s.rhs += op.p_z()[z] * inner;
  }
  return s;
}

double assumption_slack(const PosPairOperator& op, std::span<const double> g, const LabelLaw& labels) {
  check_labels(op, g, labels);
  const Vector mean = numkit::matvec(op.cond(), g);
  double slack = 0.0;
  for (std::size_t z = 0; z < op.latent_count(); ++z)
    for (std::size_t k = 0; k < labels.values.size(); ++k) {
      const double r = mean[z] - labels.values[k];
      slack += op.p_z()[z] * labels.law(z, k) * r * r;
    }
  return 2.0 * slack;
}

LabelLaw random_label_law(std::size_t latents, std::size_t values, Rng& rng) {
  if (values == 0) throw DimensionError("random_label_law: need at least one label value");
  LabelLaw law{Vector(values), DenseMatrix(latents, values)};
  for (double& v : law.values) v = rng.normal();
  for (std::size_t z = 0; z < latents; ++z) {
    double total = 0.0;
    for (std::size_t k = 0; k < values; ++k) total += law.law(z, k) = std::exp(rng.normal());
    for (std::size_t k = 0; k < values; ++k) law.law(z, k) /= total;
  }
  return law;
}

AssumptionReport assumption_bound_check(const FiniteTask& task, std::size_t trials, const Rng& rng,
                                        std::size_t threads) {
  const auto op = PosPairOperator::build_exact(task);
  AssumptionReport report;
  report.trials.resize(trials);
  numkit::parallel_for(trials, threads, [&](std::size_t i) {
    Rng local = rng.split(i);
    const double scale = std::exp(local.normal());
    Vector g(op.view_count());
    for (double& x : g) x = scale * local.normal();
    const LabelLaw labels = random_label_law(op.latent_count(), 2 + local.uniform_int(4), local);
    report.trials[i] = assumption_sides(op, g, labels);
  });
  report.max_violation = trials == 0 ? 0.0 : -kInf;
  for (const auto& t : report.trials) report.max_violation = std::max(report.max_violation, t.lhs - 2.0 * t.rhs);
  return report;
}

// ---- Linear prediction ----

DenseMatrix fit_linear(const DenseMatrix& rep, const DenseMatrix& targets, double l2, std::span<const double> weights) {
  const std::size_t n = rep.rows(), d = rep.cols(), m = targets.cols();
  if (n == 0) throw DimensionError("fit_linear: no samples");
  if (targets.rows() != n) throw DimensionError("fit_linear: targets and representation differ in rows");
  if (!weights.empty() && weights.size() != n) throw DimensionError("fit_linear: one weight per sample");
  if (!(l2 >= 0.0)) throw DomainError("fit_linear: l2 must be nonnegative");
  if (d == 0) return DenseMatrix(0, m);
  DenseMatrix normal(d, d), rhs(d, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const auto r = rep.row_span(i);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) normal(a, b) += w * r[a] * r[b];
      for (std::size_t c = 0; c < m; ++c) rhs(a, c) += w * r[a] * targets(i, c);
    }
  }
  for (std::size_t a = 0; a < d; ++a) normal(a, a) += l2;
  return numkit::solve_spd(normal, rhs);
}

LabeledViews sample_labeled(const FiniteTask& task, std::size_t n, Rng& rng) {
  if (!task.labels()) throw ConfigError("downstream: task has no labels");
  LabeledViews out;
  out.views.reserve(n);
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t z = rng.categorical(task.p_z());
    out.views.push_back(tasklab::sample_view(task, z, rng));
    out.labels.push_back((*task.labels())[z]);
  }
  return out;
}

namespace {

struct Scored {
  double squared = 0.0;
  double top1 = 0.0;
};

DenseMatrix centered_onehot(const std::vector<std::size_t>& labels, std::size_t classes) {
  DenseMatrix y(labels.size(), classes, -1.0 / static_cast<double>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) y(i, labels[i]) += 1.0;
  return y;
}

Scored score(const DenseMatrix& features, std::size_t d, const DenseMatrix& beta, const DenseMatrix& targets,
             const std::vector<std::size_t>& labels) {
  const std::size_t n = features.rows(), classes = targets.cols();
  Scored s;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t guess = 0;
    double best = -kInf;
    for (std::size_t c = 0; c < classes; ++c) {
      double y = 0.0;
      for (std::size_t k = 0; k < d; ++k) y += features(i, k) * beta(k, c);
      const double r = y - targets(i, c);
      s.squared += r * r;
      if (y > best) {
        best = y;
        guess = c;
      }
    }
    if (guess != labels[i]) s.top1 += 1.0;
  }
  s.squared /= static_cast<double>(n);
  s.top1 /= static_cast<double>(n);
  return s;
}

}  // namespace

DownstreamReport downstream_eval(const FiniteTask& task, const Representation& rep, const LabeledViews& train,
                                 const LabeledViews& val, const LabeledViews& test, const std::vector<double>& l2_grid,
                                 const std::vector<std::size_t>& d_grid) {
  if (!task.labels()) throw ConfigError("downstream: task has no labels");
  const std::pair<const char*, const LabeledViews*> splits[] = {{"train", &train}, {"val", &val}, {"test", &test}};
  for (const auto& [name, split] : splits) {
    if (split->views.empty()) throw ConfigError(std::string("downstream: ") + name + " split is empty");
    if (split->views.size() != split->labels.size())
      throw DimensionError(std::string("downstream: ") + name + " split has mismatched labels");
  }
  if (l2_grid.empty() || d_grid.empty()) throw ConfigError("downstream: l2 and d grids must be nonempty");
  const std::size_t classes = task.class_count();
  const DenseMatrix f_train = rep(train.views), f_val = rep(val.views), f_test = rep(test.views);
  for (std::size_t d : d_grid)
    if (d > f_train.cols()) throw DimensionError("downstream: d exceeds the representation dimension");
  const DenseMatrix y_train = centered_onehot(train.labels, classes);
  const DenseMatrix y_val = centered_onehot(val.labels, classes);
  const DenseMatrix y_test = centered_onehot(test.labels, classes);

  DownstreamReport report;
  std::optional<std::size_t> chosen;
  std::vector<DenseMatrix> betas;
  for (std::size_t d : d_grid)
    for (double l2 : l2_grid) {
      DownstreamCell cell{l2, d, kInf, kInf};
      DenseMatrix beta;
      try {
        beta = fit_linear(f_train.block(0, 0, f_train.rows(), d), y_train, l2);
        const Scored s = score(f_val, d, beta, y_val, val.labels);
        cell.val_squared_error = s.squared;
        cell.val_top1_error = s.top1;
      } catch (const SingularityError&) {
      }
      report.grid.push_back(cell);
      betas.push_back(std::move(beta));
      if (!std::isfinite(cell.val_squared_error)) continue;
      const auto& best = chosen ? report.grid[*chosen] : cell;
      if (!chosen || std::pair(cell.val_top1_error, cell.val_squared_error) <
                         std::pair(best.val_top1_error, best.val_squared_error))
        chosen = report.grid.size() - 1;
    }
  if (!chosen) throw SingularityError("downstream: every grid cell had a singular normal matrix");
  const DownstreamCell& pick = report.grid[*chosen];
  report.chosen_l2 = pick.l2;
  report.chosen_d = pick.d;
  const Scored s = score(f_test, pick.d, betas[*chosen], y_test, test.labels);
  report.test_squared_error = s.squared;
  report.test_top1_error = s.top1;
  return report;
}

// ---- Excess-risk bound ----

void BoundSpec::validate() const {
  if (d == 0) throw ConfigError("bound: d must be positive");
  if (!(radius >= 0.0)) throw ConfigError("bound: radius must be nonnegative");
  if (n == 0) throw ConfigError("bound: n must be positive");
  if (!(noise >= 0.0)) throw ConfigError("bound: noise must be nonnegative");
  if (iterations == 0) throw ConfigError("bound: iterations must be positive");
  if (!(step > 0.0)) throw ConfigError("bound: step must be positive");
}

namespace {

// E|t - U| for U uniform on [-s, s].
double expected_abs(double t, double s) {
  const double a = std::abs(t);
  return a >= s ? a : (t * t + s * s) / (2.0 * s);
}

double predict(std::span<const double> beta, const DenseMatrix& functions, std::size_t view) {
  double y = 0.0;
  for (std::size_t k = 0; k < beta.size(); ++k) y += beta[k] * functions(k, view);
  return y;
}

void project_ball(Vector& beta, double radius) {
  const double norm = numkit::norm2(beta);
  if (norm > radius) {
    const double s = norm > 0.0 ? radius / norm : 0.0;
    for (double& b : beta) b *= s;
  }
}

double empirical_l1(const DenseMatrix& r, const Vector& y, const Vector& beta) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.rows(); ++i) s += std::abs(numkit::dot(r.row_span(i), beta) - y[i]);
  return s / static_cast<double>(r.rows());
}

}  // namespace

double excess_risk(const spectra::EigenBasis& basis, std::span<const double> p_a, std::span<const double> target,
                   std::span<const double> beta, double noise) {
  if (beta.size() > basis.size() || p_a.size() != basis.functions.cols() || target.size() != p_a.size())
    throw DimensionError("excess_risk: length mismatch");
  double risk = 0.0;
  for (std::size_t a = 0; a < p_a.size(); ++a) risk += p_a[a] * expected_abs(predict(beta, basis.functions, a) - target[a], noise);
  return risk - 0.5 * noise;
}

BoundReport gen_bound_check(const FiniteTask& task, const BoundSpec& spec, const Rng& rng, std::size_t threads) {
  spec.validate();
  const auto op = PosPairOperator::build_exact(task);
  const auto basis = spectra::exact_eigenbasis(op);
  const std::size_t views = op.view_count(), d = spec.d;
  if (spec.coefficients.size() > views) throw DimensionError("bound: more coefficients than eigenfunctions");
  if (d > views) throw DimensionError("bound: d exceeds |A|");
  Vector c(views, 0.0);
  std::copy(spec.coefficients.begin(), spec.coefficients.end(), c.begin());
  Vector target(views, 0.0);
  for (std::size_t i = 0; i < views; ++i)
    for (std::size_t a = 0; a < views; ++a) target[a] += c[i] * basis.functions(i, a);

  BoundReport report;
  report.eps = spectra::predicted_discrepancy(basis, c);
  const Vector beta_star(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(d));
  report.beta_norm = numkit::norm2(beta_star);
  const double dd = static_cast<double>(d);
  report.estimation_term = 2.0 * dd * spec.radius / std::sqrt(static_cast<double>(spec.n));
  report.radius_term = std::sqrt(dd) * std::max(report.beta_norm - spec.radius, 0.0);
  if (d < views && report.eps > 0.0) {
    const double gap = 1.0 - basis.eigenvalues[d];
    report.truncation_term = gap <= kInvariantTol ? kInf : std::sqrt(report.eps / (2.0 * gap));
  }
  report.bound = report.estimation_term + report.radius_term + report.truncation_term;

  Vector clipped = beta_star;
  project_ball(clipped, spec.radius);
  report.excess.assign(spec.trials, 0.0);
  std::vector<char> stalled(spec.trials, 0);
  numkit::parallel_for(spec.trials, threads, [&](std::size_t trial) {
    Rng local = rng.split(trial);
    DenseMatrix r(spec.n, d);
    Vector y(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const std::size_t a = tasklab::sample_marginal_view(task, local).id();
      for (std::size_t k = 0; k < d; ++k) r(i, k) = basis.functions(k, a);
      y[i] = target[a] + (spec.noise > 0.0 ? local.uniform(-spec.noise, spec.noise) : 0.0);
    }
    Vector beta(d, 0.0), best = beta, grad(d);
    double best_obj = empirical_l1(r, y, beta);
    for (std::size_t t = 1; t <= spec.iterations; ++t) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < spec.n; ++i) {
        const double res = numkit::dot(r.row_span(i), beta) - y[i];
        const double sgn = res > 0.0 ? 1.0 : (res < 0.0 ? -1.0 : 0.0);
        for (std::size_t k = 0; k < d; ++k) grad[k] += sgn * r(i, k);
      }
      const double lr = spec.step / std::sqrt(static_cast<double>(t));
      for (std::size_t k = 0; k < d; ++k) beta[k] -= lr * grad[k] / static_cast<double>(spec.n);
      project_ball(beta, spec.radius);
      const double obj = empirical_l1(r, y, beta);
      if (obj < best_obj) {
        best_obj = obj;
        best = beta;
      }
    }
    stalled[trial] = best_obj > empirical_l1(r, y, clipped) + 1e-4;
    report.excess[trial] = excess_risk(basis, op.p_a(), target, best, spec.noise);
  });
  double total = 0.0;
  for (std::size_t t = 0; t < spec.trials; ++t) {
    total += report.excess[t];
    if (report.excess[t] <= report.bound) ++report.trials_within;
    if (stalled[t]) ++report.unconverged;
  }
  report.mean_excess = spec.trials == 0 ? 0.0 : total / static_cast<double>(spec.trials);
  return report;
}

// ---- Population loss minimizers ----

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::xent: return "xent";
    case LossKind::logistic: return "logistic";
    case LossKind::spectral: return "spectral";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "xent") return LossKind::xent;
  if (text == "logistic") return LossKind::logistic;
  if (text == "spectral") return LossKind::spectral;
  throw ConfigError("unknown loss '" + std::string(text) + "' (expected xent, logistic or spectral)");
}

bool LossMinimumReport::minimizer_wins() const {
  for (double v : perturbed)
    if (!(v > at_minimizer)) return false;
  if (loss == LossKind::xent) return scale_gap() <= 1e-12 * std::max(1.0, std::abs(at_minimizer));
  for (const auto& [scale, v] : rescaled)
    if (!(v > at_minimizer)) return false;
  return true;
}

double LossMinimumReport::scale_gap() const {
  double gap = 0.0;
  for (const auto& [scale, v] : rescaled) gap = std::max(gap, std::abs(v - at_minimizer));
  return gap;
}

LossMinimumReport loss_minimum_verify(const FiniteTask& task, LossKind loss, std::size_t perturbations,
                                      const Rng& rng, double spread) {
  const auto op = PosPairOperator::build_exact(task);
  auto eval = [&](const DenseMatrix& k) {
    switch (loss) {
      case LossKind::xent: return contrastive::population_xent(k, op);
      case LossKind::logistic: return contrastive::population_logistic(k, op);
      case LossKind::spectral: return contrastive::population_spectral(k, op);
    }
    return 0.0;
  };
  const DenseMatrix k_plus = op.kernel();
  const std::size_t n = k_plus.rows();
  LossMinimumReport report;
  report.loss = loss;
  report.at_minimizer = eval(k_plus);
  Rng local = rng.split("perturb");
  for (std::size_t t = 0; t < perturbations; ++t) {
    DenseMatrix k = k_plus;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double f = std::exp(spread * local.normal());
        k(i, j) *= f;
        if (j != i) k(j, i) *= f;
      }
    report.perturbed.push_back(eval(k));
  }
  std::vector<double> scales{0.5, 2.0};
  if (loss == LossKind::xent) scales.push_back(3.0);
  for (double s : scales) report.rescaled.emplace_back(s, eval(k_plus * s));
  report.closed_form = std::numeric_limits<double>::quiet_NaN();
  if (loss == LossKind::spectral) {
    double s = 0.0;
    const auto& p = op.p_a();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) s += op.joint()(i, j) * op.joint()(i, j) / (p[i] * p[j]);
    report.closed_form = -s;
  }
  return report;
}

}  // namespace pairspec::analysis
