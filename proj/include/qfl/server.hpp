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

// Synchronous round orchestration: client sampling, broadcast, filtered
// aggregation and per-round bookkeeping.

#ifndef QFL_SERVER_HPP_
#define QFL_SERVER_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qfl/client.hpp"
#include "qfl/errors.hpp"
#include "qfl/privacy.hpp"
#include "qfl/random.hpp"

namespace qfl {

enum class Sampling { kUniform, kFim };

struct TrainingConfig {
  int clients = 1;            // U
  int clients_per_round = 1;  // K
  int rounds = 1;             // T
  double eta_g = 1.0;         // server step; 1 is plain averaging
  Sampling sampling = Sampling::kUniform;
  bool enforce_dp = false;
  std::uint64_t seed = 0;
  int workers = 1;
  LocalConfig local;

  void Validate() const {
    if (clients < 1) throw ConfigError("clients", "must be >= 1");
    if (clients_per_round < 1 || clients_per_round > clients) {
      throw ConfigError("clients_per_round",
                        "K = " + std::to_string(clients_per_round) +
                            " must lie in [1, U = " + std::to_string(clients) +
                            "]");
    }
    if (rounds < 1) throw ConfigError("rounds", "must be >= 1");
    if (!(eta_g >= 0.0) || !std::isfinite(eta_g)) {
      throw ConfigError("eta_g", "must be finite and >= 0");
    }
    if (workers < 1) throw ConfigError("workers", "must be >= 1");
    local.Validate();
  }
};

struct GlobalModel {
  std::vector<double> params;
  std::int64_t round = 0;
};

// Runs fn(i) for i in [0, n) on up to `workers` threads. Work is pulled from
// a shared counter; each index is processed exactly once. The first
// exception by index order is rethrown after all threads join.
inline void ParallelFor(std::size_t n, int workers,
                        const std::function<void(std::size_t)>& fn) {
  const std::size_t w =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w - 1);
  for (std::size_t t = 1; t < w; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Picks K distinct clients. Uniform mode draws a uniform K-subset by a
// partial Fisher-Yates shuffle. FIM mode draws sequentially without
// replacement with probability proportional to the remaining traces; if the
// remaining weight is zero the draw falls back to uniform over the
// remaining clients. Returned ids are sorted.
inline std::vector<std::int64_t> SampleClients(
    int clients, int k, Sampling sampling,
    std::optional<std::span<const double>> traces, RandomStream& stream) {
  if (k < 1 || k > clients) {
    throw ConfigError("clients_per_round",
                      "K = " + std::to_string(k) + " exceeds U = " +
                          std::to_string(clients));
  }
  if ((sampling == Sampling::kFim) != traces.has_value()) {
    throw InputError("FIM traces must be given exactly in fim sampling mode");
  }
  std::vector<std::int64_t> pool(clients);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::int64_t> chosen;
  chosen.reserve(k);

  if (sampling == Sampling::kUniform) {
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, clients - 1);
      std::swap(pool[i], pool[pick(stream)]);
      chosen.push_back(pool[i]);
    }
  } else {
    if (traces->size() != static_cast<std::size_t>(clients)) {
      throw StructuralError("trace count does not match client count");
    }
    std::vector<double> w(traces->begin(), traces->end());
    for (double x : w) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw InputError("FIM traces must be finite and >= 0");
      }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < k; ++i) {
      const std::size_t remaining = pool.size();
      double total = 0.0;
      for (std::size_t j = 0; j < remaining; ++j) total += w[pool[j]];
      std::size_t pick = remaining - 1;
      if (total > 0.0) {
        const double r = unit(stream) * total;
        double acc = 0.0;
        for (std::size_t j = 0; j < remaining; ++j) {
          acc += w[pool[j]];
          if (r < acc) {
            pick = j;
            break;
          }
        }
        // Never land on a zero-weight client through rounding at the end.
        while (w[pool[pick]] == 0.0 && pick > 0) --pick;
      } else {
        std::uniform_int_distribution<std::size_t> u(0, remaining - 1);
        pick = u(stream);
      }
      chosen.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// theta^{t+1} = theta^t + eta_g (mean(accepted) - theta^t). An empty list
// leaves the parameters unchanged (the caller logs the no-op round).
inline GlobalModel Aggregate(const std::vector<std::vector<double>>& accepted,
                             double eta_g, const GlobalModel& prev) {
  GlobalModel next{prev.params, prev.round + 1};
  if (accepted.empty()) return next;
  const std::size_t dim = prev.params.size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& m : accepted) {
    if (m.size() != dim) {
      throw StructuralError("accepted model of dimension " +
                            std::to_string(m.size()) + ", expected " +
                            std::to_string(dim));
    }
    for (std::size_t j = 0; j < dim; ++j) mean[j] += m[j];
  }
  const double inv = 1.0 / static_cast<double>(accepted.size());
  for (std::size_t j = 0; j < dim; ++j) {
    mean[j] *= inv;
    next.params[j] = eta_g == 1.0
                         ? mean[j]
                         : prev.params[j] + eta_g * (mean[j] - prev.params[j]);
  }
  return next;
}

struct Evaluation {
  double loss = NAN;
  double accuracy = NAN;
};

struct RoundRecord {
  std::int64_t round = 0;
  double sigma_t_sq = 0.0;
  std::vector<std::int64_t> selected;
  std::vector<std::int64_t> accepted;
  std::vector<std::int64_t> failed;
  double global_loss = NAN;
  double test_accuracy = NAN;
  double epsilon_glob = 0.0;
  // Coordinates dropped by sparsification / coordinates in the models of
  // the clients that completed, summed over those clients.
  std::size_t dropped_coordinates = 0;
  std::size_t total_coordinates = 0;
  // Largest ||phi_hat - phi|| over transmitted models.
  double max_deviation = 0.0;
  double max_local_global_distance = 0.0;
  // Global parameters after this round's aggregation.
  std::vector<double> params;
};

struct RunResult {
  std::vector<double> initial_params;
  std::vector<RoundRecord> records;
  BudgetLedger ledger;
  std::vector<std::string> warnings;
  // Largest filter radius violation seen across every transmitted model,
  // max(||phi_hat - phi|| - b/lambda, 0). Zero in a correct run.
  double worst_filter_violation = 0.0;
};

namespace internal {

[[noreturn]] inline void RethrowWithContext(const std::string& ctx) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(e.field(), ctx + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(ctx + ": " + e.what());
  } catch (const StructuralError& e) {
    throw StructuralError(ctx + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(ctx + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(ctx + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ctx + ": " + e.what());
  }
}

}  // namespace internal

// Executes T synchronous rounds: sample -> broadcast -> local meta updates
// with sigma_t^2 -> sparsify/filter -> aggregate -> ledger -> evaluate.
// Client streams are derived from (seed, round, client), so the result does
// not depend on cfg.workers. `evaluate(params)` scores the global model on
// held-out data.
template <LocalObjective Objective, typename Evaluator>
RunResult RunTraining(const TrainingConfig& cfg,
                      const std::vector<Objective>& clients,
                      std::vector<double> theta0, const PrivacyParams& privacy,
                      Evaluator&& evaluate) {
  cfg.Validate();
  privacy.Validate();
  if (clients.size() != static_cast<std::size_t>(cfg.clients)) {
    throw ConfigError("clients", "config says U = " +
                                     std::to_string(cfg.clients) + " but " +
                                     std::to_string(clients.size()) +
                                     " client objectives were given");
  }
  if (privacy.rounds != cfg.rounds ||
      privacy.clients_per_round != cfg.clients_per_round) {
    throw ConfigError("privacy", "privacy T/K must match the federation");
  }
  for (const auto& c : clients) {
    if (c.param_count() != theta0.size()) {
      throw StructuralError("client parameter dimension mismatch");
    }
  }

  RunResult result;
  result.initial_params = theta0;
  GlobalModel global{std::move(theta0), 0};
  const double eps_round = PerRoundEpsilon(privacy);

  for (int t = 0; t < cfg.rounds; ++t) {
    const std::string ctx = "round " + std::to_string(t);
    RoundRecord rec;
    rec.round = t;
    rec.sigma_t_sq = InjectedSigmaSq(privacy, t, cfg.enforce_dp);

    std::optional<std::vector<double>> traces;
    if (cfg.sampling == Sampling::kFim) {
      traces.emplace(clients.size());
      try {
        ParallelFor(clients.size(), cfg.workers, [&](std::size_t u) {
          (*traces)[u] = FimTrace(clients[u], global.params);
        });
      } catch (...) {
        internal::RethrowWithContext(ctx + ", FIM traces");
      }
    }
    auto sample_stream = DeriveStream({cfg.seed, Tag(StreamTag::kSampling),
                                       static_cast<std::uint64_t>(t)});
    std::optional<std::span<const double>> trace_view;
    if (traces) trace_view = std::span<const double>(*traces);
    rec.selected = SampleClients(cfg.clients, cfg.clients_per_round,
                                 cfg.sampling, trace_view, sample_stream);

    std::vector<ClientUpdate> updates(rec.selected.size());
    ParallelFor(rec.selected.size(), cfg.workers, [&](std::size_t i) {
      const std::int64_t u = rec.selected[i];
      auto stream = DeriveStream({cfg.seed, Tag(StreamTag::kClient),
                                  static_cast<std::uint64_t>(t),
                                  static_cast<std::uint64_t>(u)});
      try {
        updates[i] = RunClientRound(u, clients[u], global.params, cfg.local,
                                    rec.sigma_t_sq, privacy.estimation_error,
                                    privacy.lambda, stream);
      } catch (...) {
        internal::RethrowWithContext(ctx + ", client " + std::to_string(u));
      }
    });

    std::vector<std::vector<double>> accepted;
    std::vector<std::pair<std::int64_t, double>> spend;
    const double radius = privacy.FilterRadius();
    for (const ClientUpdate& up : updates) {
      if (!up.ok) {
        rec.failed.push_back(up.client);
        result.warnings.push_back(ctx + ": client " +
                                  std::to_string(up.client) +
                                  " excluded: " + up.error);
        continue;
      }
      spend.emplace_back(up.client, eps_round);
      rec.dropped_coordinates += up.sparse.dropped_count();
      rec.total_coordinates += up.sparse.dim;
      rec.max_deviation = std::max(rec.max_deviation, up.deviation);
      rec.max_local_global_distance =
          std::max(rec.max_local_global_distance, up.local_global_distance);
      result.worst_filter_violation =
          std::max(result.worst_filter_violation, up.deviation - radius);
      if (up.accepted) {
        rec.accepted.push_back(up.client);
        accepted.push_back(up.sparse.Densify(global.params));
      }
    }
    if (accepted.empty()) {
      result.warnings.push_back(ctx +
                                ": no client accepted; global model unchanged");
    }
    global = Aggregate(accepted, cfg.eta_g, global);
    result.ledger.Record(t, spend);
    rec.epsilon_glob = result.ledger.total();

    const Evaluation ev = evaluate(std::span<const double>(global.params));
    rec.global_loss = ev.loss;
    rec.test_accuracy = ev.accuracy;
    rec.params = global.params;
    result.records.push_back(std::move(rec));
  }
  return result;
}

inline std::string JoinIds(const std::vector<std::int64_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

// One row per round; selected/accepted client ids are ';'-separated.
inline void WriteRoundsCsv(std::ostream& os,
                           const std::vector<RoundRecord>& records) {
  os << "round,sigma_t_sq,selected,accepted,global_loss,test_accuracy,"
        "epsilon_glob\n";
  for (const RoundRecord& r : records) {
    os << r.round << ',' << FormatDouble(r.sigma_t_sq) << ','
       << JoinIds(r.selected) << ',' << JoinIds(r.accepted) << ','
       << FormatDouble(r.global_loss) << ',' << FormatDouble(r.test_accuracy)
       << ',' << FormatDouble(r.epsilon_glob) << '\n';
  }
}

}  // namespace qfl

#endif  // QFL_SERVER_HPP_
