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

// Client-level differential privacy: noise calibration, the adaptive decay
// schedule, the Gaussian mechanism, the n-qubit gradient-variance factor and
// the global budget ledger.

#ifndef QFL_PRIVACY_HPP_
#define QFL_PRIVACY_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qfl/errors.hpp"
#include "qfl/random.hpp"

namespace qfl {

struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 1e-5;
  // Clipping / Lipschitz bound L, in gradient-norm units.
  double lipschitz = 1.0;
  // Estimation error bound b of the sparsified model.
  double estimation_error = 0.1;
  double lambda = 1.0;
  double sigma0_sq = 0.0;
  double alpha = 0.0;
  std::int64_t rounds = 1;
  std::int64_t clients_per_round = 1;

  void Validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw ConfigError("epsilon", "must be finite and > 0");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw ConfigError("delta", "must lie in (0, 1)");
    }
    if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz)) {
      throw ConfigError("lipschitz", "must be finite and >= 0");
    }
    if (!(estimation_error > 0.0)) {
      throw ConfigError("estimation_error", "must be > 0");
    }
    if (!(lambda > 0.0)) throw ConfigError("lambda", "must be > 0");
    if (!(sigma0_sq >= 0.0)) throw ConfigError("sigma0_sq", "must be >= 0");
    if (!(alpha >= 0.0)) throw ConfigError("alpha", "must be >= 0");
    if (rounds < 1) throw ConfigError("rounds", "must be >= 1");
    if (clients_per_round < 1) {
      throw ConfigError("clients_per_round", "must be >= 1");
    }
  }

  // Filter radius b / lambda.
  double FilterRadius() const { return estimation_error / lambda; }
};

// Minimum per-client Gaussian noise variance for (epsilon, delta) user-level
// DP after T rounds with K clients per round:
//   sigma^2 = 8 T (2L + b)^2 ln(1/delta) / (K^2 epsilon^2).
inline double Lemma1SigmaSq(const PrivacyParams& p) {
  p.Validate();
  const double t = static_cast<double>(p.rounds);
  const double k = static_cast<double>(p.clients_per_round);
  const double spread = 2.0 * p.lipschitz + p.estimation_error;
  return 8.0 * t * spread * spread * std::log(1.0 / p.delta) /
         (k * k * p.epsilon * p.epsilon);
}

// sigma_t^2 = sigma0^2 / (1 + alpha t).
inline double AdaptiveSigmaSq(double sigma0_sq, double alpha, std::int64_t t) {
  if (!(sigma0_sq >= 0.0)) throw ConfigError("sigma0_sq", "must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("alpha", "must be >= 0");
  if (t < 0) throw ConfigError("t", "round index must be >= 0");
  return sigma0_sq / (1.0 + alpha * static_cast<double>(t));
}

// Variance actually injected in round t. With enforce_dp the adaptive
// schedule is floored at the calibrated minimum so that decay can never push
// the noise below the guarantee; otherwise the raw schedule is used.
inline double InjectedSigmaSq(const PrivacyParams& p, std::int64_t t,
                              bool enforce_dp) {
  const double scheduled = AdaptiveSigmaSq(p.sigma0_sq, p.alpha, t);
  if (!enforce_dp) return scheduled;
  return std::max(scheduled, Lemma1SigmaSq(p));
}

// I.i.d. N(0, sigma_sq) draws. A zero variance yields the zero vector and
// leaves the stream untouched.
inline std::vector<double> GaussianNoise(std::size_t dim, double sigma_sq,
                                         RandomStream& stream) {
  if (!(sigma_sq >= 0.0)) throw InputError("noise variance must be >= 0");
  std::vector<double> out(dim, 0.0);
  if (sigma_sq == 0.0) return out;
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma_sq));
  for (double& v : out) v = normal(stream);
  return out;
}

// Gradient-variance reduction of an n-qubit estimator relative to the
// single-qubit case: 3 / (2^{2n} - 1). Equals 1 at n = 1.
inline double VarianceFactor(int n_qubits) {
  if (n_qubits < 1) throw ConfigError("n_qubits", "must be >= 1");
  return 3.0 / (std::ldexp(1.0, 2 * n_qubits) - 1.0);
}

// Privacy budget spent per participating client per round, so that T rounds
// of spending add up to the configured epsilon for each client.
inline double PerRoundEpsilon(const PrivacyParams& p) {
  return p.epsilon / static_cast<double>(p.rounds);
}

struct LedgerEntry {
  std::int64_t round = 0;
  std::int64_t client = 0;
  double epsilon = 0.0;
};

// Running account of eps_glob = sum_t sum_u eps_u^t. Entries are summed left
// to right in insertion order, so the total is reproducible bit for bit from
// the entry list.
class BudgetLedger {
 public:
  void Record(std::int64_t round,
              const std::vector<std::pair<std::int64_t, double>>& per_client) {
    for (const auto& [client, eps] : per_client) {
      if (!(eps >= 0.0)) {
        throw InputError("negative or NaN epsilon for client " +
                         std::to_string(client) + " in round " +
                         std::to_string(round));
      }
    }
    for (const auto& [client, eps] : per_client) {
      entries_.push_back({round, client, eps});
      total_ += eps;
    }
  }

  double total() const { return total_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }

  void WriteCsv(std::ostream& os) const;

 private:
  std::vector<LedgerEntry> entries_;
  double total_ = 0.0;
};

// Shortest decimal that round-trips a double; used by every CSV writer.
inline std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline void BudgetLedger::WriteCsv(std::ostream& os) const {
  os << "round,client,epsilon\n";
  for (const LedgerEntry& e : entries_) {
    os << e.round << ',' << e.client << ',' << FormatDouble(e.epsilon) << '\n';
  }
}

}  // namespace qfl

#endif  // QFL_PRIVACY_HPP_
