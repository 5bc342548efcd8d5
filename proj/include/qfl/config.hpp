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

// INI run configuration. Every key has a default; unknown sections and keys
// are rejected so that a typo can never silently fall back to a default.

#ifndef QFL_CONFIG_HPP_
#define QFL_CONFIG_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qfl/analysis.hpp"
#include "qfl/client.hpp"
#include "qfl/errors.hpp"
#include "qfl/privacy.hpp"
#include "qfl/qnn.hpp"
#include "qfl/server.hpp"

namespace qfl {

enum class DataSource { kQuadratic, kSynthetic, kMnist };

struct DataConfig {
  DataSource source = DataSource::kQuadratic;
  // Quadratic federation.
  int dim = 4;
  double mu = 0.5;
  double smoothness = 2.0;
  double heterogeneity = 1.0;
  // QNN tasks.
  std::size_t train_samples = 200;
  std::size_t test_samples = 100;
  int classes_per_client = 2;
  // MNIST. Relative paths resolve against the config file's directory.
  std::string mnist_images;
  std::string mnist_labels;
  std::vector<int> digits = {0, 1};
  int grid_rows = 4;
  int grid_cols = 2;
  bool minmax = true;
};

struct ModelConfig {
  int n_qubits = 4;
  int blocks = 2;
  double init_scale = 0.5;
  Readout readout = Readout::kLocalZ;
};

struct ScanConfig {
  std::vector<int> n_range = {2, 4, 6};
  std::vector<int> layer_range = {20};
  int samples = 200;
  Readout readout = Readout::kGlobalZero;
};

struct VarianceConfig {
  std::vector<int> n_range = {2, 4};
  int layers = 20;
  int models = 30;
  std::size_t samples = 64;
  std::size_t batch_size = 8;
  int trials = 200;
  Readout readout = Readout::kGlobalZero;
};

struct BoundsConfig {
  BoundInputs inputs;
  std::vector<double> kappa_sweep = {1.0, 0.5, 0.25, 0.125};
};

struct RunConfig {
  TrainingConfig training;
  PrivacyParams privacy;
  DataConfig data;
  ModelConfig model;
  ScanConfig scan;
  VarianceConfig variance;
  BoundsConfig bounds;
  // Canonical "section.key=value" lines of every key the file set, sorted;
  // hashed into output names.
  std::string canonical;

  RunConfig() {
    training.clients = 4;
    training.clients_per_round = 2;
    training.rounds = 5;
    training.local.eta = 0.05;
    training.local.beta = 0.05;
    privacy.sigma0_sq = 1e-4;
    privacy.alpha = 0.1;
    // A negligible filter radius: sparsification then drops nothing.
    privacy.estimation_error = 1e-12;
    SyncPrivacy();
  }

  // T and K of the privacy calibration follow the federation.
  void SyncPrivacy() {
    privacy.rounds = training.rounds;
    privacy.clients_per_round = training.clients_per_round;
  }

  void Validate() const {
    training.Validate();
    privacy.Validate();
    if (data.dim < 1) throw ConfigError("data.dim", "must be >= 1");
    if (data.classes_per_client < 1) {
      throw ConfigError("data.classes_per_client", "must be >= 1");
    }
    if (model.n_qubits < 1 || model.n_qubits > kMaxQubits) {
      throw ConfigError("model.n_qubits", "must lie in [1, " +
                                              std::to_string(kMaxQubits) + "]");
    }
    if (!(model.init_scale >= 0.0)) {
      throw ConfigError("model.init_scale", "must be >= 0");
    }
    if (scan.samples < 100) {
      throw ConfigError("scan.samples", "must be >= 100, got " +
                                            std::to_string(scan.samples));
    }
    if (variance.trials < 100) {
      throw ConfigError("variance.trials", "must be >= 100");
    }
    if (variance.models < 1) {
      throw ConfigError("variance.models", "must be >= 1");
    }
    if (variance.batch_size < 1 || variance.batch_size > variance.samples) {
      throw ConfigError("variance.batch_size", "must lie in [1, samples]");
    }
    bounds.inputs.Validate();
    if (!(bounds.inputs.kappa > 0.0 && bounds.inputs.kappa <= 1.0)) {
      throw ConfigError("bounds.kappa", "must lie in (0, 1]");
    }
    for (double k : bounds.kappa_sweep) {
      if (!(k > 0.0 && k <= 1.0)) {
        throw ConfigError("bounds.kappa_sweep", "entries must lie in (0, 1]");
      }
    }
  }
};

namespace internal {

inline std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double ParseDouble(const std::string& field, const std::string& raw) {
  const std::string s = Trim(raw);
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (s.empty() || pos != s.size()) {
    throw ConfigError(field, "expected a number, got '" + raw + "'");
  }
  return v;
}

inline std::int64_t ParseInt(const std::string& field, const std::string& raw) {
  const std::string s = Trim(raw);
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (s.empty() || pos != s.size()) {
    throw ConfigError(field, "expected an integer, got '" + raw + "'");
  }
  return v;
}

inline int ParseInt32(const std::string& field, const std::string& raw) {
  const std::int64_t v = ParseInt(field, raw);
  if (v < -(1LL << 31) || v >= (1LL << 31)) {
    throw ConfigError(field, "integer out of range");
  }
  return static_cast<int>(v);
}

inline std::size_t ParseCount(const std::string& field, const std::string& raw) {
  const std::int64_t v = ParseInt(field, raw);
  if (v < 0) throw ConfigError(field, "must be >= 0");
  return static_cast<std::size_t>(v);
}

inline bool ParseBool(const std::string& field, const std::string& raw) {
  const std::string s = Trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(field, "expected true/false, got '" + raw + "'");
}

template <typename T, typename Parse>
std::vector<T> ParseList(const std::string& field, const std::string& raw,
                         Parse parse) {
  std::vector<T> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse(field, item));
  if (out.empty()) throw ConfigError(field, "list must not be empty");
  return out;
}

inline Readout ParseReadout(const std::string& field, const std::string& raw) {
  const std::string s = Trim(raw);
  if (s == "local_z") return Readout::kLocalZ;
  if (s == "global_zero") return Readout::kGlobalZero;
  throw ConfigError(field, "expected local_z or global_zero, got '" + raw + "'");
}

}  // namespace internal

// Parses INI text. `base_dir` anchors relative data paths.
inline RunConfig ParseRunConfig(const std::string& text,
                                const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  using namespace internal;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", "line " + std::to_string(e.line()) + ": " +
                                    e.message());
  }

  RunConfig c;
  TrainingConfig& tr = c.training;
  LocalConfig& lo = c.training.local;
  PrivacyParams& pr = c.privacy;
  DataConfig& da = c.data;
  ModelConfig& mo = c.model;
  BoundInputs& bi = c.bounds.inputs;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto dbl = [](double& dst) -> Setter {
    return [&dst](const std::string& f, const std::string& v) {
      dst = ParseDouble(f, v);
    };
  };
  auto i32 = [](int& dst) -> Setter {
    return [&dst](const std::string& f, const std::string& v) {
      dst = ParseInt32(f, v);
    };
  };
  auto cnt = [](std::size_t& dst) -> Setter {
    return [&dst](const std::string& f, const std::string& v) {
      dst = ParseCount(f, v);
    };
  };
  auto bln = [](bool& dst) -> Setter {
    return [&dst](const std::string& f, const std::string& v) {
      dst = ParseBool(f, v);
    };
  };
  auto rdo = [](Readout& dst) -> Setter {
    return [&dst](const std::string& f, const std::string& v) {
      dst = ParseReadout(f, v);
    };
  };
  auto ints = [](std::vector<int>& dst) -> Setter {
    return [&dst](const std::string& f, const std::string& v) {
      dst = ParseList<int>(f, v, ParseInt32);
    };
  };
  auto path = [&base_dir](std::string& dst) -> Setter {
    return [&dst, &base_dir](const std::string&, const std::string& v) {
      std::filesystem::path p(Trim(v));
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      dst = p.lexically_normal().string();
    };
  };

  const std::map<std::string, std::map<std::string, Setter>> schema = {
      {"federation",
       {{"clients", i32(tr.clients)},
        {"clients_per_round", i32(tr.clients_per_round)},
        {"rounds", i32(tr.rounds)},
        {"eta_g", dbl(tr.eta_g)},
        {"enforce_dp", bln(tr.enforce_dp)},
        {"seed",
         [&tr](const std::string& f, const std::string& v) {
           const std::int64_t s = ParseInt(f, v);
           if (s < 0) throw ConfigError(f, "must be >= 0");
           tr.seed = static_cast<std::uint64_t>(s);
         }},
        {"sampling",
         [&tr](const std::string& f, const std::string& v) {
           const std::string s = Trim(v);
           if (s == "uniform") {
             tr.sampling = Sampling::kUniform;
           } else if (s == "fim") {
             tr.sampling = Sampling::kFim;
           } else {
             throw ConfigError(f, "expected uniform or fim, got '" + v + "'");
           }
         }}}},
      {"local",
       {{"eta", dbl(lo.eta)},
        {"beta", dbl(lo.beta)},
        {"tau", i32(lo.tau)},
        {"support_fraction", dbl(lo.support_fraction)},
        {"clip_norm", dbl(lo.clip_norm)},
        {"adam", bln(lo.adam)},
        {"batch_size", cnt(lo.batch_size)},
        {"hessian",
         [&lo](const std::string& f, const std::string& v) {
           const std::string s = Trim(v);
           if (s == "exact_hvp") {
             lo.hessian_mode = HessianMode::kExactHvp;
           } else if (s == "first_order") {
             lo.hessian_mode = HessianMode::kFirstOrder;
           } else {
             throw ConfigError(f, "expected exact_hvp or first_order");
           }
         }}}},
      {"privacy",
       {{"epsilon", dbl(pr.epsilon)},
        {"delta", dbl(pr.delta)},
        {"lipschitz", dbl(pr.lipschitz)},
        {"estimation_error", dbl(pr.estimation_error)},
        {"lambda", dbl(pr.lambda)},
        {"sigma0_sq", dbl(pr.sigma0_sq)},
        {"alpha", dbl(pr.alpha)}}},
      {"data",
       {{"source",
         [&da](const std::string& f, const std::string& v) {
           const std::string s = Trim(v);
           if (s == "quadratic") {
             da.source = DataSource::kQuadratic;
           } else if (s == "synthetic") {
             da.source = DataSource::kSynthetic;
           } else if (s == "mnist") {
             da.source = DataSource::kMnist;
           } else {
             throw ConfigError(f, "expected quadratic, synthetic or mnist");
           }
         }},
        {"dim", i32(da.dim)},
        {"mu", dbl(da.mu)},
        {"smoothness", dbl(da.smoothness)},
        {"heterogeneity", dbl(da.heterogeneity)},
        {"train_samples", cnt(da.train_samples)},
        {"test_samples", cnt(da.test_samples)},
        {"classes_per_client", i32(da.classes_per_client)},
        {"mnist_images", path(da.mnist_images)},
        {"mnist_labels", path(da.mnist_labels)},
        {"digits", ints(da.digits)},
        {"grid_rows", i32(da.grid_rows)},
        {"grid_cols", i32(da.grid_cols)},
        {"minmax", bln(da.minmax)}}},
      {"model",
       {{"n_qubits", i32(mo.n_qubits)},
        {"blocks", i32(mo.blocks)},
        {"init_scale", dbl(mo.init_scale)},
        {"readout", rdo(mo.readout)}}},
      {"scan",
       {{"n_range", ints(c.scan.n_range)},
        {"layer_range", ints(c.scan.layer_range)},
        {"samples", i32(c.scan.samples)},
        {"readout", rdo(c.scan.readout)}}},
      {"variance",
       {{"n_range", ints(c.variance.n_range)},
        {"layers", i32(c.variance.layers)},
        {"models", i32(c.variance.models)},
        {"samples", cnt(c.variance.samples)},
        {"batch_size", cnt(c.variance.batch_size)},
        {"trials", i32(c.variance.trials)},
        {"readout", rdo(c.variance.readout)}}},
      {"bounds",
       {{"eta_l", dbl(bi.eta_l)},
        {"tau", dbl(bi.tau)},
        {"T", dbl(bi.rounds)},
        {"L", dbl(bi.smoothness)},
        {"mu", dbl(bi.mu)},
        {"sigma_star_sq", dbl(bi.sigma_star_sq)},
        {"sigma_sq", dbl(bi.sigma_sq)},
        {"sigma_g_sq", dbl(bi.sigma_g_sq)},
        {"n_qubits", i32(bi.n_qubits)},
        {"theta0_gap", dbl(bi.theta0_gap)},
        {"loss_drop", dbl(bi.loss_drop)},
        {"kappa", dbl(bi.kappa)},
        {"vartheta_sq", dbl(bi.vartheta_sq)},
        {"kappa_sweep",
         [&c](const std::string& f, const std::string& v) {
           c.bounds.kappa_sweep = ParseList<double>(f, v, ParseDouble);
         }}}},
  };

  std::vector<std::string> lines;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw ConfigError(section, "key outside any section");
    }
    const auto sit = schema.find(section);
    if (sit == schema.end()) {
      throw ConfigError(section, "unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      const std::string field = section + "." + key;
      const auto kit = sit->second.find(key);
      if (kit == sit->second.end()) {
        throw ConfigError(field, "unknown key '" + field + "'");
      }
      const std::string value = node.get_value<std::string>();
      kit->second(field, value);
      lines.push_back(field + "=" + Trim(value) + "\n");
    }
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& line : lines) c.canonical += line;
  c.SyncPrivacy();
  return c;
}

inline RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseRunConfig(ss.str(), std::filesystem::path(path).parent_path());
}

// 64-bit FNV-1a.
inline std::uint64_t Fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace qfl

#endif  // QFL_CONFIG_HPP_
