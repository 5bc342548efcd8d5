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

// Experiment harnesses (gradient-variance scans, mini-batch variance) and
// evaluators for the convex and non-convex convergence bounds.

#ifndef QFL_ANALYSIS_HPP_
#define QFL_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qfl/client.hpp"
#include "qfl/data.hpp"
#include "qfl/errors.hpp"
#include "qfl/privacy.hpp"
#include "qfl/qnn.hpp"
#include "qfl/random.hpp"
#include "qfl/server.hpp"

namespace qfl {

struct BoundInputs {
  double eta_l = 0.0;
  double tau = 1.0;
  double rounds = 1.0;  // T
  double smoothness = 0.0;  // L
  double mu = 0.0;
  double sigma_star_sq = 0.0;
  double sigma_sq = 0.0;
  double sigma_g_sq = 0.0;
  int n_qubits = 1;
  double theta0_gap = 0.0;  // ||theta0 - theta*||^2
  double loss_drop = 0.0;   // L(theta0) - L(theta_t)
  double kappa = 1.0;
  double vartheta_sq = 0.0;

  void Validate() const {
    auto nonneg = [](double v, const char* field) {
      if (!(v >= 0.0) || std::isnan(v)) {
        throw ConfigError(field, "must be >= 0");
      }
    };
    nonneg(eta_l, "eta_l");
    nonneg(smoothness, "L");
    nonneg(mu, "mu");
    nonneg(sigma_star_sq, "sigma_star_sq");
    nonneg(sigma_sq, "sigma_sq");
    nonneg(sigma_g_sq, "sigma_g_sq");
    nonneg(theta0_gap, "theta0_gap");
    nonneg(loss_drop, "loss_drop");
    nonneg(vartheta_sq, "vartheta_sq");
    if (!(tau >= 1.0)) throw ConfigError("tau", "must be >= 1");
    if (!(rounds >= 1.0)) throw ConfigError("T", "must be >= 1");
    if (n_qubits < 1) throw ConfigError("n_qubits", "must be >= 1");
  }
};

// Step-size window 1/(2 sqrt6 tau^2 L) < eta < 1/(6 tau L). For tau = 1 the
// lower end exceeds the upper one, so the window is empty.
struct StepWindow {
  double lower = 0.0;
  double upper = INFINITY;
  bool empty() const { return !(lower < upper); }
  bool contains(double eta) const { return eta > lower && eta < upper; }
};

inline StepWindow Theorem3StepWindow(double tau, double smoothness) {
  if (!(smoothness > 0.0)) return {};
  return {1.0 / (2.0 * std::sqrt(6.0) * tau * tau * smoothness),
          1.0 / (6.0 * tau * smoothness)};
}

struct Theorem3Terms {
  double total = 0.0;
  double initial = 0.0;        // 3 ||theta0 - theta*||^2 / (T eta tau)
  double heterogeneity = 0.0;  // 9 eta tau sigma*^2
  double drift = 0.0;          // 36 eta^2 tau (tau - 1) L sigma*^2
  double quantum = 0.0;        // (2tau^2 + 3tau + 1) eta^2 3 sigma^2/(4^n - 1)
  std::optional<std::string> warning;
};

inline Theorem3Terms Theorem3Bound(const BoundInputs& in) {
  in.Validate();
  Theorem3Terms r;
  const double eta = in.eta_l;
  const double tau = in.tau;
  if (in.theta0_gap > 0.0) {
    r.initial = 3.0 * in.theta0_gap / (in.rounds * eta * tau);
  }
  r.heterogeneity = 9.0 * eta * tau * in.sigma_star_sq;
  r.drift = 36.0 * eta * eta * tau * (tau - 1.0) * in.smoothness *
            in.sigma_star_sq;
  r.quantum = (2.0 * tau * tau + 3.0 * tau + 1.0) * eta * eta * in.sigma_sq *
              VarianceFactor(in.n_qubits);
  r.total = r.initial + r.heterogeneity + r.drift + r.quantum;

  const StepWindow w = Theorem3StepWindow(tau, in.smoothness);
  if (w.empty()) {
    r.warning = "step-size window is empty for tau = " +
                FormatDouble(tau) + "; only eta < 1/(6 tau L) is checked";
    if (!(eta < w.upper)) {
      *r.warning += " and eta = " + FormatDouble(eta) + " violates it";
    }
  } else if (!w.contains(eta)) {
    r.warning = "eta = " + FormatDouble(eta) + " outside the window (" +
                FormatDouble(w.lower) + ", " + FormatDouble(w.upper) + ")";
  }
  return r;
}

struct Theorem4Terms {
  double total = 0.0;
  double descent = 0.0;        // 8 loss_drop / (T eta tau kappa)
  double drift = 0.0;          // 40 T eta^2 tau (tau - 1) L^2 sigma_g^2 / kappa
  double heterogeneity = 0.0;  // 24 T eta tau L sigma_g^2 / kappa
};

inline Theorem4Terms Theorem4Bound(const BoundInputs& in) {
  if (!(in.kappa > 0.0 && in.kappa <= 1.0)) {
    throw ConfigError("kappa", "must lie in (0, 1], got " +
                                   FormatDouble(in.kappa));
  }
  in.Validate();
  Theorem4Terms r;
  const double eta = in.eta_l;
  const double tau = in.tau;
  const double big_l = in.smoothness;
  if (in.loss_drop > 0.0) {
    r.descent = 8.0 * in.loss_drop / (in.rounds * eta * tau * in.kappa);
  }
  r.drift = 40.0 * in.rounds * eta * eta * tau * (tau - 1.0) * big_l * big_l *
            in.sigma_g_sq / in.kappa;
  r.heterogeneity =
      24.0 * in.rounds * eta * tau * big_l * in.sigma_g_sq / in.kappa;
  r.total = r.descent + r.drift + r.heterogeneity;
  return r;
}

// kappa = 1 - sum_{t=m}^{T} P_sharp 1(||grad L(theta^(m))|| + vartheta < L),
// taken literally: the indicator depends only on round m, so it contributes
// (T - m + 1) P_sharp or nothing. The comparison mixes a gradient norm with a
// smoothness constant; it is kept as a plain threshold.
inline double KappaFromIndicator(double p_sharp, double grad_norm_m,
                                 double vartheta, double smoothness,
                                 std::int64_t m, std::int64_t rounds) {
  if (!(p_sharp >= 0.0 && p_sharp <= 1.0)) {
    throw ConfigError("p_sharp", "must lie in [0, 1]");
  }
  if (m < 0 || m > rounds) throw ConfigError("m", "must lie in [0, T]");
  const bool trapped = grad_norm_m + vartheta < smoothness;
  return 1.0 - (trapped ? static_cast<double>(rounds - m + 1) * p_sharp : 0.0);
}

// ---------------------------------------------------------------------------
// Gradient-variance experiments.

struct VarianceScanRow {
  int n_qubits = 0;
  int layers = 0;
  int n_samples = 0;
  double sample_variance = 0.0;
};

// Unbiased sample variance, summed in index order.
inline double SampleVariance(std::span<const double> xs) {
  if (xs.size() < 2) throw InputError("sample variance needs >= 2 values");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

// Ordinary least-squares slope of y on x.
inline double LeastSquaresSlope(std::span<const double> x,
                                std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InputError("slope fit needs >= 2 paired points");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw InputError("slope fit needs distinct x values");
  return sxy / sxx;
}

// Seed of the s-th random circuit at (n, layers).
inline std::uint64_t ScanCircuitSeed(std::uint64_t seed, int n, int layers,
                                     int s) {
  return HashSeed({seed, Tag(StreamTag::kScan), static_cast<std::uint64_t>(n),
                   static_cast<std::uint64_t>(layers),
                   static_cast<std::uint64_t>(s)});
}

// For every (n, layers) pair draws `samples` random layered circuits and
// records the sample variance of the designated gradient component. Each
// circuit depends only on (seed, n, layers, s), so rows are reproducible
// regardless of `workers`.
inline std::vector<VarianceScanRow> BarrenPlateauScan(
    const std::vector<int>& n_range, const std::vector<int>& layer_range,
    int samples, std::uint64_t seed, Readout readout = Readout::kGlobalZero,
    int workers = 1) {
  if (samples < 100) {
    throw ConfigError("samples", "must be >= 100, got " +
                                     std::to_string(samples));
  }
  if (n_range.empty()) throw ConfigError("n_range", "must not be empty");
  if (layer_range.empty()) {
    throw ConfigError("layer_range", "must not be empty");
  }
  for (int n : n_range) {
    if (n < 2 || n > kMaxQubits) {
      throw ConfigError("n_range", "qubit counts must lie in [2, " +
                                       std::to_string(kMaxQubits) + "]");
    }
  }
  for (int l : layer_range) {
    if (l < 1) throw ConfigError("layer_range", "layers must be >= 1");
  }
  std::vector<VarianceScanRow> rows;
  for (int n : n_range) {
    for (int layers : layer_range) {
      std::vector<double> grads(samples);
      ParallelFor(grads.size(), workers, [&](std::size_t s) {
        const auto lc = RandomLayeredCircuit(
            n, layers, ScanCircuitSeed(seed, n, layers, static_cast<int>(s)));
        grads[s] = DesignatedGradient(lc, readout);
      });
      rows.push_back({n, layers, samples, SampleVariance(grads)});
    }
  }
  return rows;
}

// Least-squares slope of log2(variance) against n over rows that share one
// layer count.
inline double Log2VarianceSlope(const std::vector<VarianceScanRow>& rows) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& r : rows) {
    x.push_back(r.n_qubits);
    y.push_back(std::log2(r.sample_variance));
  }
  return LeastSquaresSlope(x, y);
}

inline void WriteScanCsv(std::ostream& os,
                         const std::vector<VarianceScanRow>& rows) {
  os << "n_qubits,layers,n_samples,sample_variance\n";
  for (const auto& r : rows) {
    os << r.n_qubits << ',' << r.layers << ',' << r.n_samples << ','
       << FormatDouble(r.sample_variance) << '\n';
  }
}

// A random-circuit classifier: angle encoding followed by a random layered
// circuit whose designated rotation is the single trainable parameter.
inline QnnModel MakeRandomCircuitModel(int n_qubits, int layers,
                                       std::uint64_t seed, Readout readout) {
  LayeredCircuit lc = RandomLayeredCircuit(n_qubits, layers, seed);
  QnnModel m;
  m.circuit = std::move(lc.circuit);
  m.params = std::move(lc.params);
  m.readout = readout;
  m.readout_qubit = 0;
  return m;
}

// n_samples inputs uniform in [0, pi]^n with uniformly random {0, 1} labels.
inline Batch MakeRandomBatch(int n_qubits, std::size_t n_samples,
                             RandomStream& stream) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::bernoulli_distribution coin(0.5);
  Batch b;
  for (std::size_t i = 0; i < n_samples; ++i) {
    std::vector<double> x(n_qubits);
    for (double& v : x) v = angle(stream);
    b.inputs.push_back(std::move(x));
    b.labels.push_back(coin(stream) ? 1.0 : 0.0);
  }
  return b;
}

// Mean over `trials` of ||g_full - g_B||^2, where g_B is the loss gradient
// on a batch of `batch_size` samples drawn without replacement. This is the
// estimator of E||g_bar - g_B||^2; it is exactly 0 when the batch is the
// whole dataset.
inline double EmpiricalMinibatchVariance(const QnnModel& model,
                                         const Batch& data,
                                         std::size_t batch_size, int trials,
                                         std::uint64_t seed) {
  if (trials < 100) {
    throw ConfigError("trials", "must be >= 100, got " +
                                    std::to_string(trials));
  }
  if (batch_size < 1 || batch_size > data.size()) {
    throw InputError("batch_size " + std::to_string(batch_size) +
                     " must lie in [1, " + std::to_string(data.size()) + "]");
  }
  model.Validate();
  const std::size_t n = data.size();
  const std::size_t dim = model.params.size();
  // Per-sample gradients once; every mini-batch gradient is a mean of these.
  std::vector<std::vector<double>> per_sample(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx[] = {i};
    per_sample[i] = GradParameterShift(model, model.params, data, idx);
  }
  std::vector<double> full(dim, 0.0);
  for (const auto& g : per_sample) {
    for (std::size_t j = 0; j < dim; ++j) full[j] += g[j];
  }
  for (double& v : full) v /= static_cast<double>(n);
  if (batch_size == n) return 0.0;

  std::vector<std::size_t> order(n);
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto stream = DeriveStream({seed, Tag(StreamTag::kMinibatch),
                                static_cast<std::uint64_t>(t)});
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(stream)]);
    }
    std::vector<double> gb(dim, 0.0);
    for (std::size_t i = 0; i < batch_size; ++i) {
      for (std::size_t j = 0; j < dim; ++j) gb[j] += per_sample[order[i]][j];
    }
    double d2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = gb[j] / static_cast<double>(batch_size) - full[j];
      d2 += d * d;
    }
    acc += d2;
  }
  return acc / trials;
}

// ---------------------------------------------------------------------------
// Trajectory diagnostics.

// theta_bar = mean of theta^(0), ..., theta^(T-1): the initial parameters
// and the global parameters after each of the first T - 1 rounds.
inline std::vector<double> AverageIterate(
    std::span<const double> initial, const std::vector<RoundRecord>& records) {
  std::vector<double> avg(initial.begin(), initial.end());
  if (records.empty()) return avg;
  for (std::size_t t = 0; t + 1 < records.size(); ++t) {
    for (std::size_t j = 0; j < avg.size(); ++j) {
      avg[j] += records[t].params[j];
    }
  }
  for (double& v : avg) v /= static_cast<double>(records.size());
  return avg;
}

// Bounded-heterogeneity proxy: max over the visited iterates (including
// theta^(0)) of (1/U) sum_u ||grad f_u - grad f||^2.
inline double QuadraticSigmaGSq(const QuadraticProblem& problem,
                                std::span<const double> initial,
                                const std::vector<RoundRecord>& records) {
  double s = problem.GradientDissimilarity(initial);
  for (const auto& r : records) {
    s = std::max(s, problem.GradientDissimilarity(r.params));
  }
  return s;
}

// Secant smoothness estimate along a trajectory: the largest
// ||g(x_{k+1}) - g(x_k)|| / ||x_{k+1} - x_k|| over consecutive points that
// moved. Returns 0 for a trajectory that never moves.
inline double SecantSmoothness(const std::vector<std::vector<double>>& points,
                               const std::vector<std::vector<double>>& grads) {
  if (points.size() != grads.size()) {
    throw StructuralError("points and gradients differ in count");
  }
  double best = 0.0;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    const double dx = DeviationNorm(points[k + 1], points[k]);
    if (dx <= 0.0) continue;
    best = std::max(best, DeviationNorm(grads[k + 1], grads[k]) / dx);
  }
  return best;
}

struct ConvergenceReport {
  bool pass = false;
  double gap = 0.0;
  double bound = 0.0;
  double ratio = 0.0;  // gap / bound; 0 when both vanish
  std::optional<std::string> warning;
};

// Checks L(theta_bar) - L(theta*) <= theorem3 bound for a run on a quadratic
// federation. `inputs` supplies the step sizes and noise; theta0_gap and
// sigma_star_sq are filled from the problem and the run.
inline ConvergenceReport VerifyConvexConvergence(
    const QuadraticProblem& problem, std::span<const double> initial,
    const std::vector<RoundRecord>& records, BoundInputs inputs) {
  const auto star = problem.GlobalOptimum();
  const double loss_star = problem.GlobalLoss(star);
  const auto avg = AverageIterate(initial, records);
  double d0 = 0.0;
  for (std::size_t j = 0; j < star.size(); ++j) {
    d0 += (initial[j] - star[j]) * (initial[j] - star[j]);
  }
  inputs.theta0_gap = d0;
  inputs.sigma_star_sq = problem.SigmaStarSq();
  inputs.rounds = static_cast<double>(std::max<std::size_t>(records.size(), 1));
  const Theorem3Terms terms = Theorem3Bound(inputs);

  ConvergenceReport rep;
  rep.gap = std::max(problem.GlobalLoss(avg) - loss_star, 0.0);
  rep.bound = terms.total;
  rep.pass = rep.gap <= rep.bound;
  rep.ratio = rep.bound > 0.0 ? rep.gap / rep.bound
                              : (rep.gap > 0.0 ? INFINITY : 0.0);
  rep.warning = terms.warning;
  return rep;
}

}  // namespace qfl

#endif  // QFL_ANALYSIS_HPP_
