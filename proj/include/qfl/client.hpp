//
// Copyright 2026 The qfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Local training on one client: support/query split, the noisy meta update,
// sparsified model estimation, the aggregation filter and the FIM trace.

#ifndef QFL_CLIENT_HPP_
#define QFL_CLIENT_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qfl/data.hpp"
#include "qfl/errors.hpp"
#include "qfl/privacy.hpp"
#include "qfl/qnn.hpp"
#include "qfl/random.hpp"

namespace qfl {

// A client's local objective. Loss and Gradient evaluate the mean loss over
// the samples selected by `indices`. Objectives whose kSplitsData is false
// have no sample structure: they ignore `indices` and the support and query
// sets are both the whole local objective.
template <typename T>
concept LocalObjective = requires(const T& t, std::span<const double> p,
                                  std::span<const std::size_t> idx) {
  { t.sample_count() } -> std::convertible_to<std::size_t>;
  { t.param_count() } -> std::convertible_to<std::size_t>;
  { t.Loss(p, idx) } -> std::convertible_to<double>;
  { t.Gradient(p, idx) } -> std::same_as<std::vector<double>>;
  { T::kSplitsData } -> std::convertible_to<bool>;
};

// QNN with MSE loss over a local dataset.
class QnnObjective {
 public:
  static constexpr bool kSplitsData = true;

  QnnObjective(std::shared_ptr<const QnnModel> model, Batch data)
      : model_(std::move(model)), data_(std::move(data)) {}

  std::size_t sample_count() const { return data_.size(); }
  std::size_t param_count() const { return model_->circuit.param_count; }
  const QnnModel& model() const { return *model_; }
  const Batch& data() const { return data_; }

  double Loss(std::span<const double> p, std::span<const std::size_t> idx) const {
    if (idx.empty()) throw InputError("empty batch");
    double s = 0.0;
    for (std::size_t i : idx) {
      s += LossMse(Forward(*model_, p, data_.inputs[i]), data_.labels[i]);
    }
    return s / static_cast<double>(idx.size());
  }

  std::vector<double> Gradient(std::span<const double> p,
                               std::span<const std::size_t> idx) const {
    return GradParameterShift(*model_, p, data_, idx);
  }

 private:
  std::shared_ptr<const QnnModel> model_;
  Batch data_;
};

// Client u of a quadratic federation.
class QuadraticObjective {
 public:
  static constexpr bool kSplitsData = false;

  QuadraticObjective(std::shared_ptr<const QuadraticProblem> problem, int client)
      : problem_(std::move(problem)), client_(client) {}

  std::size_t sample_count() const { return 1; }
  std::size_t param_count() const { return problem_->dim; }

  double Loss(std::span<const double> p, std::span<const std::size_t>) const {
    return problem_->ClientLoss(client_, p);
  }
  std::vector<double> Gradient(std::span<const double> p,
                               std::span<const std::size_t>) const {
    return problem_->ClientGradient(client_, p);
  }

 private:
  std::shared_ptr<const QuadraticProblem> problem_;
  int client_;
};

enum class HessianMode { kExactHvp, kFirstOrder };

struct LocalConfig {
  double eta = 0.01;   // inner step
  double beta = 0.01;  // meta step
  int tau = 1;         // local iterations per round
  double support_fraction = 0.5;
  HessianMode hessian_mode = HessianMode::kFirstOrder;
  // Gradients are clipped to this norm before use.
  double clip_norm = INFINITY;
  // Adam moments on the inner step.
  bool adam = false;
  // If > 0, support and query sets are each subsampled to at most this many
  // samples per round.
  std::size_t batch_size = 0;

  void Validate() const {
    if (!(eta > 0.0)) throw ConfigError("eta", "must be > 0");
    // beta = 0 is the degenerate "no meta step" case and is allowed.
    if (!(beta >= 0.0)) throw ConfigError("beta", "must be >= 0");
    if (tau < 1) throw ConfigError("tau", "must be >= 1");
    if (!(support_fraction > 0.0 && support_fraction < 1.0)) {
      throw ConfigError("support_fraction", "must lie in (0, 1)");
    }
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm", "must be > 0");
  }
};

struct SupportQuery {
  std::vector<std::size_t> support;
  std::vector<std::size_t> query;
};

// Shuffles 0..n-1 and takes floor(fraction * n) indices (at least 1, at most
// n - 1) as support; the rest is query.
inline SupportQuery SplitSupportQuery(std::size_t n, double fraction,
                                      RandomStream& stream) {
  if (n < 2) {
    throw InputError("need at least 2 samples to split, got " +
                     std::to_string(n));
  }
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("support_fraction", "must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), stream);
  auto n_support = static_cast<std::size_t>(std::floor(fraction * n));
  n_support = std::clamp<std::size_t>(n_support, 1, n - 1);
  SupportQuery out;
  out.support.assign(order.begin(), order.begin() + n_support);
  out.query.assign(order.begin() + n_support, order.end());
  return out;
}

inline std::pair<Dataset, Dataset> SplitSupportQuery(const Dataset& ds,
                                                     double fraction,
                                                     RandomStream& stream) {
  auto sq = SplitSupportQuery(ds.size(), fraction, stream);
  return {ds.Select(sq.support), ds.Select(sq.query)};
}

inline double Norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ||a - b||_2, summed in index order.
inline double DeviationNorm(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw StructuralError("dimension mismatch: " + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Scales v onto the ball of radius clip_norm. Returns the resulting norm.
inline double ClipToNorm(std::vector<double>& v, double clip_norm) {
  const double n = Norm2(v);
  if (n > clip_norm) {
    const double s = clip_norm / n;
    for (double& x : v) x *= s;
    return Norm2(v);
  }
  return n;
}

namespace internal {

inline void RequireFinite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError(std::string("non-finite ") + what);
  }
}

// Keeps at most `limit` indices, chosen by a seeded shuffle.
inline std::vector<std::size_t> Subsample(std::vector<std::size_t> idx,
                                          std::size_t limit,
                                          RandomStream& stream) {
  if (limit == 0 || idx.size() <= limit) return idx;
  std::shuffle(idx.begin(), idx.end(), stream);
  idx.resize(limit);
  return idx;
}

}  // namespace internal

struct MetaUpdateResult {
  std::vector<double> phi;
  // Largest norm of any gradient handed to the update after clipping.
  double max_clipped_norm = 0.0;
};

// Runs tau iterations of
//   theta~ = theta - eta grad L(theta; S)
//   phi    = theta - beta [I - eta H_S(theta~)] (clip(grad L(theta~; Q)) + G_t)
//   theta  = phi
// with G_t ~ N(0, sigma_sq I) drawn fresh each iteration. In kExactHvp mode
// the Hessian-vector product is a central difference of the support
// gradient with step h = 1e-4 (1 + ||theta~||) along v / ||v||; in
// kFirstOrder mode the bracket is the identity. Throws NumericalError on any
// non-finite intermediate.
template <LocalObjective Objective>
MetaUpdateResult LocalMetaUpdate(const Objective& obj,
                                 std::span<const double> theta0,
                                 const LocalConfig& cfg, double sigma_sq,
                                 std::span<const std::size_t> support,
                                 std::span<const std::size_t> query,
                                 RandomStream& stream) {
  cfg.Validate();
  const std::size_t dim = obj.param_count();
  if (theta0.size() != dim) throw StructuralError("theta dimension mismatch");

  MetaUpdateResult out;
  std::vector<double> theta(theta0.begin(), theta0.end());
  std::vector<double> tilde(dim);
  std::vector<double> m1(dim, 0.0);
  std::vector<double> m2(dim, 0.0);
  constexpr double kAdamB1 = 0.9;
  constexpr double kAdamB2 = 0.999;
  constexpr double kAdamEps = 1e-8;

  for (int k = 0; k < cfg.tau; ++k) {
    auto gs = obj.Gradient(theta, support);
    internal::RequireFinite(gs, "support gradient");
    out.max_clipped_norm =
        std::max(out.max_clipped_norm, ClipToNorm(gs, cfg.clip_norm));
    if (cfg.adam) {
      const double c1 = 1.0 - std::pow(kAdamB1, k + 1);
      const double c2 = 1.0 - std::pow(kAdamB2, k + 1);
      for (std::size_t j = 0; j < dim; ++j) {
        m1[j] = kAdamB1 * m1[j] + (1.0 - kAdamB1) * gs[j];
        m2[j] = kAdamB2 * m2[j] + (1.0 - kAdamB2) * gs[j] * gs[j];
        tilde[j] = theta[j] - cfg.eta * (m1[j] / c1) /
                                  (std::sqrt(m2[j] / c2) + kAdamEps);
      }
    } else {
      for (std::size_t j = 0; j < dim; ++j) tilde[j] = theta[j] - cfg.eta * gs[j];
    }

    auto v = obj.Gradient(tilde, query);
    internal::RequireFinite(v, "query gradient");
    out.max_clipped_norm =
        std::max(out.max_clipped_norm, ClipToNorm(v, cfg.clip_norm));
    const auto noise = GaussianNoise(dim, sigma_sq, stream);
    for (std::size_t j = 0; j < dim; ++j) v[j] += noise[j];
    internal::RequireFinite(v, "noisy query gradient");

    std::vector<double> direction = v;
    if (cfg.hessian_mode == HessianMode::kExactHvp) {
      const double vnorm = Norm2(v);
      if (vnorm > 0.0) {
        const double h = 1e-4 * (1.0 + Norm2(tilde));
        std::vector<double> up(dim);
        std::vector<double> down(dim);
        for (std::size_t j = 0; j < dim; ++j) {
          up[j] = tilde[j] + h * v[j] / vnorm;
          down[j] = tilde[j] - h * v[j] / vnorm;
        }
        const auto gu = obj.Gradient(up, support);
        const auto gd = obj.Gradient(down, support);
        for (std::size_t j = 0; j < dim; ++j) {
          const double hv = (gu[j] - gd[j]) / (2.0 * h) * vnorm;
          direction[j] = v[j] - cfg.eta * hv;
        }
        internal::RequireFinite(direction, "Hessian-vector product");
      }
    }
    for (std::size_t j = 0; j < dim; ++j) theta[j] -= cfg.beta * direction[j];
    internal::RequireFinite(theta, "meta update");
  }
  out.phi = std::move(theta);
  return out;
}

// Draws the support/query split (or uses the whole objective when it has no
// sample structure), subsamples to cfg.batch_size and runs LocalMetaUpdate.
template <LocalObjective Objective>
MetaUpdateResult LocalMetaUpdate(const Objective& obj,
                                 std::span<const double> theta0,
                                 const LocalConfig& cfg, double sigma_sq,
                                 RandomStream& stream) {
  SupportQuery sq;
  if constexpr (Objective::kSplitsData) {
    sq = SplitSupportQuery(obj.sample_count(), cfg.support_fraction, stream);
    sq.support = internal::Subsample(std::move(sq.support), cfg.batch_size, stream);
    sq.query = internal::Subsample(std::move(sq.query), cfg.batch_size, stream);
  } else {
    sq.support = IndexRange(obj.sample_count());
    sq.query = sq.support;
  }
  return LocalMetaUpdate(obj, theta0, cfg, sigma_sq, sq.support, sq.query,
                         stream);
}

// A model transmitted as (index, value) pairs. Coordinates not listed are
// taken from the receiver's reference model.
struct SparseModel {
  std::size_t dim = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nonzero_count() const { return indices.size(); }
  std::size_t dropped_count() const { return dim - indices.size(); }

  std::vector<double> Densify(std::span<const double> reference) const {
    if (reference.size() != dim) {
      throw StructuralError("reference dimension mismatch");
    }
    std::vector<double> out(reference.begin(), reference.end());
    for (std::size_t k = 0; k < indices.size(); ++k) out[indices[k]] = values[k];
    return out;
  }
};

struct SparsifyResult {
  SparseModel sparse;
  // phi_hat = sparse.Densify(theta_ref).
  std::vector<double> phi_hat;
  double deviation = 0.0;
};

// Sparsified estimate of phi relative to theta_ref: coordinates whose update
// phi_j - theta_ref_j is smallest in magnitude are reverted to theta_ref
// (ties: lowest index first) for as long as ||phi_hat - phi|| <= b / lambda.
// Dropping the smallest entries first drops the maximum possible number of
// coordinates. A zero radius keeps phi unchanged.
inline SparsifyResult Sparsify(std::span<const double> phi,
                               std::span<const double> theta_ref, double b,
                               double lambda) {
  if (phi.size() != theta_ref.size()) {
    throw StructuralError("phi and reference differ in dimension");
  }
  if (!(b >= 0.0)) throw ConfigError("estimation_error", "must be >= 0");
  if (!(lambda > 0.0)) throw ConfigError("lambda", "must be > 0");
  const double radius = b / lambda;
  const std::size_t n = phi.size();

  std::vector<double> delta(n);
  for (std::size_t j = 0; j < n; ++j) delta[j] = phi[j] - theta_ref[j];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    return std::fabs(delta[a]) < std::fabs(delta[c]);
  });

  std::vector<bool> dropped(n, false);
  std::vector<std::size_t> drop_order;
  if (radius > 0.0) {
    const double budget = radius * radius;
    double used = 0.0;
    for (std::size_t j : order) {
      const double d2 = delta[j] * delta[j];
      if (used + d2 > budget) break;
      used += d2;
      dropped[j] = true;
      drop_order.push_back(j);
    }
  }

  SparsifyResult out;
  auto rebuild = [&] {
    out.sparse = SparseModel{};
    out.sparse.dim = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!dropped[j]) {
        out.sparse.indices.push_back(static_cast<std::uint32_t>(j));
        out.sparse.values.push_back(phi[j]);
      }
    }
    out.phi_hat = out.sparse.Densify(theta_ref);
    out.deviation = DeviationNorm(out.phi_hat, phi);
  };
  rebuild();
  // The greedy budget is accumulated in magnitude order; the filter sums in
  // index order. Undo drops until both agree.
  while (out.deviation > radius && !drop_order.empty()) {
    dropped[drop_order.back()] = false;
    drop_order.pop_back();
    rebuild();
  }
  return out;
}

// True iff ||phi_hat - phi||_2 <= b / lambda (inclusive).
inline bool AcceptForAggregation(std::span<const double> phi_hat,
                                 std::span<const double> phi, double b,
                                 double lambda) {
  return DeviationNorm(phi_hat, phi) <= b / lambda;
}

// Empirical Fisher trace proxy: mean over samples of ||grad loss_i||^2.
template <LocalObjective Objective>
double FimTrace(const Objective& obj, std::span<const double> params) {
  const std::size_t n = obj.sample_count();
  if (n == 0) throw InputError("empty dataset");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx[1] = {i};
    const auto g = obj.Gradient(params, idx);
    for (double x : g) s += x * x;
  }
  return s / static_cast<double>(n);
}

inline double FimTrace(const QnnModel& model, const Batch& data) {
  if (data.empty()) throw InputError("empty dataset");
  QnnObjective obj(std::make_shared<const QnnModel>(model), data);
  return FimTrace(obj, model.params);
}

// Everything the server learns from one client in one round.
struct ClientUpdate {
  std::int64_t client = 0;
  bool ok = false;
  std::string error;
  SparseModel sparse;
  std::vector<double> phi;
  std::vector<double> phi_hat;
  double deviation = 0.0;
  bool accepted = false;
  // ||phi - theta_global||, logged only.
  double local_global_distance = 0.0;
  double max_clipped_norm = 0.0;
};

// Per-client state for one round: local meta update from the broadcast
// model, sparsification against it, and the acceptance test.
template <LocalObjective Objective>
ClientUpdate RunClientRound(std::int64_t client, const Objective& obj,
                            std::span<const double> global,
                            const LocalConfig& cfg, double sigma_sq,
                            double estimation_error, double lambda,
                            RandomStream& stream) {
  ClientUpdate up;
  up.client = client;
  try {
    auto meta = LocalMetaUpdate(obj, global, cfg, sigma_sq, stream);
    auto sp = Sparsify(meta.phi, global, estimation_error, lambda);
    up.accepted = AcceptForAggregation(sp.phi_hat, meta.phi, estimation_error,
                                       lambda);
    up.deviation = sp.deviation;
    up.local_global_distance = DeviationNorm(meta.phi, global);
    up.max_clipped_norm = meta.max_clipped_norm;
    up.sparse = std::move(sp.sparse);
    up.phi_hat = std::move(sp.phi_hat);
    up.phi = std::move(meta.phi);
    up.ok = true;
  } catch (const NumericalError& e) {
    up.ok = false;
    up.accepted = false;
    up.error = e.what();
  }
  return up;
}

}  // namespace qfl

#endif  // QFL_CLIENT_HPP_
