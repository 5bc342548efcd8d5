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

// The qfl command-line tool. Kept in a header so that tests can drive it
// in-process through Run().
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#ifndef QFL_CLI_HPP_
#define QFL_CLI_HPP_

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qfl/analysis.hpp"
#include "qfl/config.hpp"
#include "qfl/errors.hpp"
#include "qfl/experiment.hpp"
#include "qfl/privacy.hpp"

namespace qfl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool kappa_sweep = false;
};

// Output naming: <command>_<artifact>_s<seed>_<config-hash>.<ext>. The hash
// covers the canonical key/value listing of the config file.
class OutputLayout {
 public:
  OutputLayout(std::string dir, std::string command, std::uint64_t seed,
               const std::string& canonical_config)
      : dir_(std::move(dir)), command_(std::move(command)), seed_(seed) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(Fnv1a64(canonical_config)));
    hash_ = buf;
  }

  std::filesystem::path Path(const std::string& artifact,
                             const std::string& ext) const {
    return std::filesystem::path(dir_) /
           (command_ + "_" + artifact + "_s" + std::to_string(seed_) + "_" +
            hash_ + "." + ext);
  }

  // Writes through a binary stream so line endings are always LF.
  std::filesystem::path Write(const std::string& artifact,
                              const std::string& ext,
                              const std::function<void(std::ostream&)>& body)
      const {
    const auto p = Path(artifact, ext);
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open '" + p.string() + "' for writing");
    body(os);
    os.flush();
    if (!os) throw Error("failed writing '" + p.string() + "'");
    return p;
  }

  const std::string& hash() const { return hash_; }

 private:
  std::string dir_;
  std::string command_;
  std::uint64_t seed_;
  std::string hash_;
};

inline RunConfig ResolveConfig(const Options& opt) {
  RunConfig cfg =
      opt.config_path.empty() ? RunConfig{} : LoadRunConfig(opt.config_path);
  if (opt.seed) cfg.training.seed = *opt.seed;
  if (opt.workers) cfg.training.workers = *opt.workers;
  cfg.SyncPrivacy();
  cfg.Validate();
  return cfg;
}

inline nlohmann::json JsonNumber(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline int CmdRunFl(const Options& opt, std::ostream& out) {
  const RunConfig cfg = ResolveConfig(opt);
  const OutputLayout layout(opt.out_dir, "run_fl", cfg.training.seed,
                            cfg.canonical);
  RunResult result;
  nlohmann::json summary;
  if (cfg.data.source == DataSource::kQuadratic) {
    QuadraticFederation fed;
    result = RunQuadratic(cfg, &fed);
    const auto star = fed.problem->GlobalOptimum();
    summary["optimal_loss"] = JsonNumber(fed.problem->GlobalLoss(star));
    summary["sigma_star_sq"] = JsonNumber(fed.problem->SigmaStarSq());
    layout.Write("problem", "json", [&](std::ostream& os) {
      os << fed.problem->ToJson().dump(2) << '\n';
    });
  } else {
    result = RunQnn(cfg);
  }

  layout.Write("rounds", "csv",
               [&](std::ostream& os) { WriteRoundsCsv(os, result.records); });
  layout.Write("ledger", "csv",
               [&](std::ostream& os) { result.ledger.WriteCsv(os); });

  std::size_t dropped = 0;
  std::size_t total = 0;
  for (const auto& r : result.records) {
    dropped += r.dropped_coordinates;
    total += r.total_coordinates;
  }
  const RoundRecord& last = result.records.back();
  summary["command"] = "run-fl";
  summary["seed"] = cfg.training.seed;
  summary["config_hash"] = layout.hash();
  summary["rounds"] = result.records.size();
  summary["final_global_loss"] = JsonNumber(last.global_loss);
  summary["final_test_accuracy"] = JsonNumber(last.test_accuracy);
  summary["epsilon_glob"] = JsonNumber(result.ledger.total());
  summary["lemma1_sigma_sq"] = JsonNumber(Lemma1SigmaSq(cfg.privacy));
  summary["dropped_fraction"] =
      JsonNumber(total ? static_cast<double>(dropped) / total : 0.0);
  summary["worst_filter_violation"] =
      JsonNumber(std::max(result.worst_filter_violation, 0.0));
  summary["warnings"] = result.warnings;
  summary["final_params"] = last.params;
  layout.Write("summary", "json",
               [&](std::ostream& os) { os << summary.dump(2) << '\n'; });

  for (const auto& w : result.warnings) out << "warning: " << w << '\n';
  out << "rounds: " << result.records.size() << '\n'
      << "final_global_loss: " << FormatDouble(last.global_loss) << '\n'
      << "final_test_accuracy: " << FormatDouble(last.test_accuracy) << '\n'
      << "epsilon_glob: " << FormatDouble(result.ledger.total()) << '\n'
      << "outputs: " << layout.Path("rounds", "csv").string() << '\n';
  return kExitOk;
}

inline int CmdBarrenPlateau(const Options& opt, std::ostream& out) {
  const RunConfig cfg = ResolveConfig(opt);
  const OutputLayout layout(opt.out_dir, "barren_plateau", cfg.training.seed,
                            cfg.canonical);
  const auto rows = BarrenPlateauScan(cfg.scan.n_range, cfg.scan.layer_range,
                                      cfg.scan.samples, cfg.training.seed,
                                      cfg.scan.readout, cfg.training.workers);
  layout.Write("scan", "csv", [&](std::ostream& os) { WriteScanCsv(os, rows); });
  for (const auto& r : rows) {
    out << "n=" << r.n_qubits << " layers=" << r.layers
        << " variance=" << FormatDouble(r.sample_variance) << '\n';
  }
  for (int layers : cfg.scan.layer_range) {
    std::vector<VarianceScanRow> sub;
    for (const auto& r : rows) {
      if (r.layers == layers) sub.push_back(r);
    }
    if (sub.size() >= 2) {
      out << "log2 slope (layers=" << layers
          << "): " << FormatDouble(Log2VarianceSlope(sub)) << '\n';
    }
  }
  return kExitOk;
}

// Mean mini-batch gradient variance over random-circuit models, per qubit
// count. Model m at n qubits depends only on (seed, n, m).
struct VarianceCheckRow {
  int n_qubits = 0;
  double mean_variance = 0.0;
  double variance_factor = 0.0;
};

inline std::vector<VarianceCheckRow> RunVarianceCheck(const VarianceConfig& v,
                                                      std::uint64_t seed,
                                                      int workers) {
  std::vector<VarianceCheckRow> rows;
  for (int n : v.n_range) {
    std::vector<double> per_model(v.models);
    ParallelFor(per_model.size(), workers, [&](std::size_t m) {
      const auto mu = static_cast<std::uint64_t>(m);
      const auto nu = static_cast<std::uint64_t>(n);
      const QnnModel model = MakeRandomCircuitModel(
          n, v.layers, HashSeed({seed, Tag(StreamTag::kScan), nu, mu}),
          v.readout);
      auto data_stream = DeriveStream({seed, Tag(StreamTag::kData), nu, mu});
      const Batch data = MakeRandomBatch(n, v.samples, data_stream);
      per_model[m] = EmpiricalMinibatchVariance(
          model, data, v.batch_size, v.trials,
          HashSeed({seed, Tag(StreamTag::kMinibatch), nu, mu}));
    });
    double mean = 0.0;
    for (double x : per_model) mean += x;
    mean /= static_cast<double>(per_model.size());
    rows.push_back({n, mean, VarianceFactor(n)});
  }
  return rows;
}

inline int CmdVarianceCheck(const Options& opt, std::ostream& out) {
  const RunConfig cfg = ResolveConfig(opt);
  const OutputLayout layout(opt.out_dir, "variance_check", cfg.training.seed,
                            cfg.canonical);
  const auto rows =
      RunVarianceCheck(cfg.variance, cfg.training.seed, cfg.training.workers);
  layout.Write("variance", "csv", [&](std::ostream& os) {
    os << "n_qubits,models,batch_size,trials,mean_variance,variance_factor,"
          "measured_ratio,predicted_ratio\n";
    for (const auto& r : rows) {
      os << r.n_qubits << ',' << cfg.variance.models << ','
         << cfg.variance.batch_size << ',' << cfg.variance.trials << ','
         << FormatDouble(r.mean_variance) << ','
         << FormatDouble(r.variance_factor) << ','
         << FormatDouble(r.mean_variance / rows.front().mean_variance) << ','
         << FormatDouble(r.variance_factor / rows.front().variance_factor)
         << '\n';
    }
  });
  for (const auto& r : rows) {
    out << "n=" << r.n_qubits << " variance=" << FormatDouble(r.mean_variance)
        << " measured_ratio="
        << FormatDouble(r.mean_variance / rows.front().mean_variance)
        << " predicted_ratio="
        << FormatDouble(r.variance_factor / rows.front().variance_factor)
        << '\n';
  }
  return kExitOk;
}

inline int CmdDpAudit(const Options& opt, std::ostream& out) {
  const RunConfig cfg = ResolveConfig(opt);
  const OutputLayout layout(opt.out_dir, "dp_audit", cfg.training.seed,
                            cfg.canonical);
  const PrivacyParams& p = cfg.privacy;
  const double lemma1 = Lemma1SigmaSq(p);
  const double eps_round = PerRoundEpsilon(p);
  layout.Write("schedule", "csv", [&](std::ostream& os) {
    os << "t,sigma_t_sq,injected_sigma_sq,epsilon_round,epsilon_glob\n";
    BudgetLedger ledger;
    for (std::int64_t t = 0; t < p.rounds; ++t) {
      std::vector<std::pair<std::int64_t, double>> spend;
      for (std::int64_t k = 0; k < p.clients_per_round; ++k) {
        spend.emplace_back(k, eps_round);
      }
      ledger.Record(t, spend);
      os << t << ',' << FormatDouble(AdaptiveSigmaSq(p.sigma0_sq, p.alpha, t))
         << ','
         << FormatDouble(InjectedSigmaSq(p, t, cfg.training.enforce_dp))
         << ',' << FormatDouble(eps_round) << ','
         << FormatDouble(ledger.total()) << '\n';
    }
  });
  out << "lemma1_sigma_sq: " << FormatDouble(lemma1) << '\n'
      << "sigma0_sq: " << FormatDouble(p.sigma0_sq) << '\n'
      << "alpha: " << FormatDouble(p.alpha) << '\n'
      << "rounds: " << p.rounds << '\n'
      << "projected_epsilon_glob: "
      << FormatDouble(eps_round * static_cast<double>(p.rounds) *
                      static_cast<double>(p.clients_per_round))
      << '\n';
  return kExitOk;
}

inline int CmdBounds(const Options& opt, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = ResolveConfig(opt);
  const OutputLayout layout(opt.out_dir, "bounds", cfg.training.seed,
                            cfg.canonical);
  std::vector<double> kappas = {cfg.bounds.inputs.kappa};
  if (opt.kappa_sweep) kappas = cfg.bounds.kappa_sweep;
  const Theorem3Terms t3 = Theorem3Bound(cfg.bounds.inputs);
  if (t3.warning) err << "warning: " << *t3.warning << '\n';
  std::vector<Theorem4Terms> t4;
  for (double k : kappas) {
    BoundInputs in = cfg.bounds.inputs;
    in.kappa = k;
    t4.push_back(Theorem4Bound(in));
  }
  layout.Write("bounds", "csv", [&](std::ostream& os) {
    os << "kappa,t3_total,t3_initial,t3_heterogeneity,t3_drift,t3_quantum,"
          "t4_total,t4_descent,t4_drift,t4_heterogeneity\n";
    for (std::size_t i = 0; i < kappas.size(); ++i) {
      os << FormatDouble(kappas[i]) << ',' << FormatDouble(t3.total) << ','
         << FormatDouble(t3.initial) << ',' << FormatDouble(t3.heterogeneity)
         << ',' << FormatDouble(t3.drift) << ',' << FormatDouble(t3.quantum)
         << ',' << FormatDouble(t4[i].total) << ','
         << FormatDouble(t4[i].descent) << ',' << FormatDouble(t4[i].drift)
         << ',' << FormatDouble(t4[i].heterogeneity) << '\n';
    }
  });
  out << "theorem3_total: " << FormatDouble(t3.total) << '\n';
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    out << "theorem4_total(kappa=" << FormatDouble(kappas[i])
        << "): " << FormatDouble(t4[i].total) << '\n';
  }
  return kExitOk;
}

// Parses `args` (args[0] is the program name) and dispatches.
inline int Run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Quantum federated learning simulator with client-level DP",
               "qfl"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  int workers = 1;
  app.add_option("--config", opt.config_path, "INI configuration file");
  app.add_option("--out", opt.out_dir, "output directory (must exist)");
  auto* seed_opt = app.add_option("--seed", seed, "overrides [federation] seed");
  auto* workers_opt = app.add_option("--workers", workers, "worker threads")
                          ->check(CLI::PositiveNumber);
  app.fallthrough();

  auto* run_fl = app.add_subcommand("run-fl", "run federated training");
  auto* bp = app.add_subcommand("barren-plateau",
                                "gradient variance vs qubit count scan");
  auto* vc = app.add_subcommand("variance-check",
                                "mini-batch gradient variance vs qubits");
  auto* dp = app.add_subcommand("dp-audit", "noise calibration and schedule");
  auto* bd = app.add_subcommand("bounds", "evaluate convergence bounds");
  bd->add_flag("--kappa-sweep", opt.kappa_sweep,
               "one row per kappa in [bounds] kappa_sweep");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (seed_opt->count()) opt.seed = seed;
  if (workers_opt->count()) opt.workers = workers;

  try {
    if (!std::filesystem::is_directory(opt.out_dir)) {
      throw ConfigError("--out", "'" + opt.out_dir + "' is not a directory");
    }
    if (run_fl->parsed()) return CmdRunFl(opt, out);
    if (bp->parsed()) return CmdBarrenPlateau(opt, out);
    if (vc->parsed()) return CmdVarianceCheck(opt, out);
    if (dp->parsed()) return CmdDpAudit(opt, out);
    if (bd->parsed()) return CmdBounds(opt, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

inline int Run(int argc, const char* const* argv, std::ostream& out,
               std::ostream& err) {
  return Run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace qfl::cli

#endif  // QFL_CLI_HPP_
