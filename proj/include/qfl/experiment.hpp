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

// Builds complete federations (data, model, client objectives, evaluator)
// from a RunConfig. Shared by the command-line tool and the acceptance
// suite so both run the exact same pipeline.

#ifndef QFL_EXPERIMENT_HPP_
#define QFL_EXPERIMENT_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "qfl/client.hpp"
#include "qfl/config.hpp"
#include "qfl/data.hpp"
#include "qfl/qnn.hpp"
#include "qfl/random.hpp"
#include "qfl/server.hpp"

namespace qfl {

struct QnnFederation {
  std::shared_ptr<const QnnModel> model;
  std::vector<QnnObjective> clients;
  Batch train;  // union of all client data
  Batch test;
};

// Loads or generates the task named by cfg.data, splits train/test, deals
// the training set to clients by label skew and draws the initial QCNN.
inline QnnFederation BuildQnnFederation(const RunConfig& cfg) {
  const std::uint64_t seed = cfg.training.seed;
  const DataConfig& d = cfg.data;
  auto data_stream = DeriveStream({seed, Tag(StreamTag::kData)});

  Dataset all;
  if (d.source == DataSource::kMnist) {
    if (d.mnist_images.empty() || d.mnist_labels.empty()) {
      throw ConfigError("data.mnist_images",
                        "mnist source needs mnist_images and mnist_labels");
    }
    all = SelectClasses(
        LoadMnistIdx(d.mnist_images, d.mnist_labels, {d.grid_rows, d.grid_cols}),
        d.digits);
    if (d.minmax) all = MinMaxToAngles(all);
  } else if (d.source == DataSource::kSynthetic) {
    all = MakeSyntheticBinaryTask(d.train_samples + d.test_samples,
                                  cfg.model.n_qubits, data_stream);
  } else {
    throw ConfigError("data.source", "not a QNN task");
  }
  if (all.n_classes != 2) {
    throw ConfigError("data.digits", "QNN tasks are binary; select 2 classes");
  }
  if (all.feature_dim > cfg.model.n_qubits) {
    throw ConfigError("model.n_qubits",
                      std::to_string(all.feature_dim) +
                          " features do not fit " +
                          std::to_string(cfg.model.n_qubits) + " qubits");
  }
  auto [train, test] =
      ShuffleSplit(all, d.train_samples, d.test_samples, data_stream);
  auto part_stream = DeriveStream({seed, Tag(StreamTag::kPartition)});
  auto parts = PartitionLabelSkew(train, cfg.training.clients,
                                  d.classes_per_client, part_stream);

  auto init_stream = DeriveStream({seed, Tag(StreamTag::kInit)});
  QnnModel m = MakeQcnnModel(cfg.model.n_qubits, cfg.model.blocks,
                             cfg.model.init_scale, init_stream);
  m.readout = cfg.model.readout;

  QnnFederation fed;
  fed.model = std::make_shared<const QnnModel>(std::move(m));
  for (const Dataset& p : parts) {
    if (p.size() < 2) {
      throw ConfigError("data.train_samples",
                        "every client needs >= 2 samples for the "
                        "support/query split");
    }
    fed.clients.emplace_back(fed.model, p.ToBatch());
  }
  fed.train = train.ToBatch();
  fed.test = test.ToBatch();
  return fed;
}

// Mean MSE and 0.5-threshold accuracy of `params` on `data`.
inline Evaluation EvaluateQnn(const QnnModel& model,
                              std::span<const double> params,
                              const Batch& data) {
  Evaluation e;
  if (data.empty()) return e;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = Forward(model, params, data.inputs[i]);
    loss += LossMse(y, data.labels[i]);
    correct += (y >= 0.5) == (data.labels[i] >= 0.5);
  }
  e.loss = loss / static_cast<double>(data.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return e;
}

struct QuadraticFederation {
  std::shared_ptr<const QuadraticProblem> problem;
  std::vector<QuadraticObjective> clients;
};

inline QuadraticFederation BuildQuadraticFederation(const RunConfig& cfg) {
  auto stream = DeriveStream({cfg.training.seed, Tag(StreamTag::kData)});
  QuadraticFederation fed;
  fed.problem = std::make_shared<const QuadraticProblem>(MakeQuadraticFederation(
      cfg.training.clients, cfg.data.dim, cfg.data.mu, cfg.data.smoothness,
      cfg.data.heterogeneity, stream));
  for (int u = 0; u < cfg.training.clients; ++u) {
    fed.clients.emplace_back(fed.problem, u);
  }
  return fed;
}

// Runs the federation described by `cfg` end to end. `fed_out`, when
// given, receives the problem so callers can inspect it afterwards.
inline RunResult RunQuadratic(const RunConfig& cfg,
                              QuadraticFederation* fed_out = nullptr) {
  QuadraticFederation fed = BuildQuadraticFederation(cfg);
  std::vector<double> theta0(cfg.data.dim, 0.0);
  const QuadraticProblem& p = *fed.problem;
  auto result = RunTraining(cfg.training, fed.clients, theta0, cfg.privacy,
                            [&p](std::span<const double> theta) {
                              return Evaluation{p.GlobalLoss(theta), NAN};
                            });
  if (fed_out) *fed_out = std::move(fed);
  return result;
}

inline RunResult RunQnn(const RunConfig& cfg, QnnFederation* fed_out = nullptr) {
  QnnFederation fed = BuildQnnFederation(cfg);
  const QnnModel& model = *fed.model;
  const Batch& test = fed.test;
  auto result = RunTraining(cfg.training, fed.clients, model.params,
                            cfg.privacy,
                            [&](std::span<const double> params) {
                              return EvaluateQnn(model, params, test);
                            });
  if (fed_out) *fed_out = std::move(fed);
  return result;
}

}  // namespace qfl

#endif  // QFL_EXPERIMENT_HPP_
