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

#include "qfl/server.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "qfl/client.hpp"
#include "qfl/data.hpp"
#include "qfl/errors.hpp"
#include "qfl/privacy.hpp"

namespace qfl {
namespace {

std::shared_ptr<const QuadraticProblem> MakeProblem(int clients, int dim,
                                                    double heterogeneity,
                                                    std::uint64_t seed) {
  auto s = DeriveStream({seed});
  return std::make_shared<const QuadraticProblem>(
      MakeQuadraticFederation(clients, dim, 0.5, 2.0, heterogeneity, s));
}

std::vector<QuadraticObjective> Objectives(
    const std::shared_ptr<const QuadraticProblem>& p) {
  std::vector<QuadraticObjective> out;
  for (int u = 0; u < p->clients(); ++u) out.emplace_back(p, u);
  return out;
}

TrainingConfig Training(int u, int k, int t, double eta, double beta, int tau) {
  TrainingConfig c;
  c.clients = u;
  c.clients_per_round = k;
  c.rounds = t;
  c.local.eta = eta;
  c.local.beta = beta;
  c.local.tau = tau;
  return c;
}

PrivacyParams Privacy(const TrainingConfig& c, double sigma0_sq, double b) {
  PrivacyParams p;
  p.rounds = c.rounds;
  p.clients_per_round = c.clients_per_round;
  p.sigma0_sq = sigma0_sq;
  p.estimation_error = b;
  return p;
}

template <typename P>
auto LossOf(const P& problem) {
  return [problem](std::span<const double> th) {
    return Evaluation{problem->GlobalLoss(th), NAN};
  };
}

TEST(ParallelForTest, EachIndexExactlyOnce) {
  for (int workers : {1, 2, 4, 7}) {
    std::vector<std::atomic<int>> hits(101);
    ParallelFor(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelForTest, RethrowsLowestIndexError) {
  for (int workers : {1, 3}) {
    try {
      ParallelFor(20, workers, [](std::size_t i) {
        if (i == 5 || i == 11) throw std::runtime_error(std::to_string(i));
      });
      FAIL() << "no exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "5");
    }
  }
}

TEST(SampleClientsTest, UniformDistinctSortedInRange) {
  RandomStream s(2);
  for (int t = 0; t < 500; ++t) {
    const auto ids = SampleClients(10, 4, Sampling::kUniform, std::nullopt, s);
    ASSERT_EQ(ids.size(), 4u);
    ASSERT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    ASSERT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
    ASSERT_GE(ids.front(), 0);
    ASSERT_LT(ids.back(), 10);
  }
}

TEST(SampleClientsTest, UniformMarginalsPassChiSquare) {
  // Each client should appear with probability K/U = 0.3.
  RandomStream s(3);
  const int draws = 20000;
  std::vector<int> counts(10, 0);
  for (int t = 0; t < draws; ++t) {
    for (auto u : SampleClients(10, 3, Sampling::kUniform, std::nullopt, s)) {
      ++counts[u];
    }
  }
  double chi = 0.0;
  const double expected = draws * 0.3;
  for (int c : counts) chi += (c - expected) * (c - expected) / expected;
  // 9 degrees of freedom; 27.88 is the 0.999 quantile.
  EXPECT_LT(chi, 27.88);
}

TEST(SampleClientsTest, FimProportionalToTrace) {
  RandomStream s(4);
  const std::vector<double> traces = {1.0, 3.0};
  const int draws = 100000;
  int ones = 0;
  for (int t = 0; t < draws; ++t) {
    ones += SampleClients(2, 1, Sampling::kFim, std::span<const double>(traces), s)[0] == 1;
  }
  EXPECT_NEAR(static_cast<double>(ones) / draws, 0.75, 0.01);
}

TEST(SampleClientsTest, FimEqualTracesPassChiSquare) {
  RandomStream s(5);
  const std::vector<double> traces(6, 2.5);
  const int draws = 30000;
  std::vector<int> counts(6, 0);
  for (int t = 0; t < draws; ++t) {
    ++counts[SampleClients(6, 1, Sampling::kFim, std::span<const double>(traces), s)[0]];
  }
  double chi = 0.0;
  const double expected = draws / 6.0;
  for (int c : counts) chi += (c - expected) * (c - expected) / expected;
  // 5 degrees of freedom; 20.52 is the 0.999 quantile.
  EXPECT_LT(chi, 20.52);
}

TEST(SampleClientsTest, FimNeverPicksZeroTraceWhileWeightRemains) {
  RandomStream s(6);
  const std::vector<double> traces = {0.0, 1.0, 0.0, 2.0};
  for (int t = 0; t < 2000; ++t) {
    const auto ids =
        SampleClients(4, 2, Sampling::kFim, std::span<const double>(traces), s);
    ASSERT_EQ(ids, (std::vector<std::int64_t>{1, 3}));
  }
}

TEST(SampleClientsTest, FimZeroTracesFallBackToUniform) {
  RandomStream s(7);
  const std::vector<double> traces(4, 0.0);
  std::vector<int> counts(4, 0);
  for (int t = 0; t < 8000; ++t) {
    for (auto u :
         SampleClients(4, 2, Sampling::kFim, std::span<const double>(traces), s)) {
      ++counts[u];
    }
  }
  for (int c : counts) EXPECT_NEAR(c / 8000.0, 0.5, 0.03);
}

TEST(SampleClientsTest, Errors) {
  RandomStream s(1);
  const std::vector<double> traces(3, 1.0);
  EXPECT_THROW(SampleClients(3, 4, Sampling::kUniform, std::nullopt, s), ConfigError);
  EXPECT_THROW(SampleClients(3, 0, Sampling::kUniform, std::nullopt, s), ConfigError);
  EXPECT_THROW(SampleClients(3, 1, Sampling::kFim, std::nullopt, s), InputError);
  EXPECT_THROW(SampleClients(3, 1, Sampling::kUniform,
                             std::span<const double>(traces), s),
               InputError);
  const std::vector<double> bad = {1.0, -1.0, 1.0};
  EXPECT_THROW(SampleClients(3, 1, Sampling::kFim, std::span<const double>(bad), s),
               InputError);
}

TEST(AggregateTest, MeanOfAccepted) {
  const GlobalModel prev{{0.0, 0.0}, 3};
  const auto next = Aggregate({{1.0, 2.0}, {3.0, 4.0}}, 1.0, prev);
  EXPECT_EQ(next.params, (std::vector<double>{2.0, 3.0}));
  EXPECT_EQ(next.round, 4);
}

TEST(AggregateTest, ServerStepInterpolates) {
  const GlobalModel prev{{1.0}, 0};
  EXPECT_DOUBLE_EQ(Aggregate({{3.0}}, 0.5, prev).params[0], 2.0);
  EXPECT_DOUBLE_EQ(Aggregate({{3.0}}, 0.0, prev).params[0], 1.0);
}

TEST(AggregateTest, EmptyListKeepsParams) {
  const GlobalModel prev{{1.5, -2.0}, 7};
  const auto next = Aggregate({}, 1.0, prev);
  EXPECT_EQ(next.params, prev.params);
  EXPECT_EQ(next.round, 8);
}

TEST(AggregateTest, DimensionMismatch) {
  const GlobalModel prev{{0.0, 0.0}, 0};
  EXPECT_THROW(Aggregate({{1.0}}, 1.0, prev), StructuralError);
}

TEST(TrainingConfigTest, Validation) {
  EXPECT_NO_THROW(Training(4, 2, 5, 0.1, 0.1, 1).Validate());
  EXPECT_THROW(Training(4, 5, 5, 0.1, 0.1, 1).Validate(), ConfigError);
  EXPECT_THROW(Training(0, 0, 5, 0.1, 0.1, 1).Validate(), ConfigError);
  EXPECT_THROW(Training(4, 2, 0, 0.1, 0.1, 1).Validate(), ConfigError);
  try {
    Training(4, 5, 5, 0.1, 0.1, 1).Validate();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "clients_per_round");
    EXPECT_NE(std::string(e.what()).find("K = 5"), std::string::npos);
  }
}

// One client, scalar a/2 theta^2, no noise, no sparsification: each round
// multiplies theta by r = 1 - beta a (1 - eta a).
TEST(RunTrainingTest, ScalarQuadraticRecursion) {
  QuadraticProblem p;
  p.dim = 1;
  p.mu = p.smoothness = 1.3;
  p.curvature = {1.3};
  p.optimum = {{0.0}};
  auto problem = std::make_shared<const QuadraticProblem>(p);
  const auto clients = Objectives(problem);
  const auto cfg = Training(1, 1, 25, 0.2, 0.3, 1);
  const auto res = RunTraining(cfg, clients, {2.0}, Privacy(cfg, 0.0, 1e-300),
                               LossOf(problem));
  const double r = 1 - 0.3 * 1.3 * (1 - 0.2 * 1.3);
  double theta = 2.0;
  for (const auto& rec : res.records) {
    theta *= r;
    EXPECT_NEAR(rec.params[0], theta, 1e-8);
    EXPECT_NEAR(rec.global_loss, 0.5 * 1.3 * theta * theta, 1e-8);
  }
}

TEST(RunTrainingTest, IdenticalAcrossWorkerCounts) {
  const auto problem = MakeProblem(8, 4, 1.0, 11);
  const auto clients = Objectives(problem);
  auto cfg = Training(8, 3, 12, 0.05, 0.05, 3);
  cfg.seed = 99;
  const auto priv = Privacy(cfg, 1e-2, 0.05);
  cfg.workers = 1;
  const auto a = RunTraining(cfg, clients, std::vector<double>(4, 0.0), priv,
                             LossOf(problem));
  cfg.workers = 4;
  const auto b = RunTraining(cfg, clients, std::vector<double>(4, 0.0), priv,
                             LossOf(problem));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    EXPECT_EQ(a.records[t].params, b.records[t].params);
    EXPECT_EQ(a.records[t].selected, b.records[t].selected);
  }
  std::ostringstream sa, sb;
  WriteRoundsCsv(sa, a.records);
  WriteRoundsCsv(sb, b.records);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(RunTrainingTest, SeedChangesTrajectory) {
  const auto problem = MakeProblem(6, 3, 1.0, 12);
  const auto clients = Objectives(problem);
  auto cfg = Training(6, 2, 5, 0.05, 0.05, 2);
  const auto priv = Privacy(cfg, 1e-2, 1e-9);
  cfg.seed = 1;
  const auto a = RunTraining(cfg, clients, std::vector<double>(3, 0.0), priv,
                             LossOf(problem));
  cfg.seed = 2;
  const auto b = RunTraining(cfg, clients, std::vector<double>(3, 0.0), priv,
                             LossOf(problem));
  EXPECT_NE(a.records.back().params, b.records.back().params);
}

TEST(RunTrainingTest, InfiniteNoiseExcludesEveryClient) {
  const auto problem = MakeProblem(4, 2, 1.0, 13);
  const auto clients = Objectives(problem);
  const auto cfg = Training(4, 2, 3, 0.1, 0.1, 1);
  const std::vector<double> theta0 = {0.25, -0.5};
  const auto res = RunTraining(cfg, clients, theta0, Privacy(cfg, INFINITY, 0.1),
                               LossOf(problem));
  for (const auto& rec : res.records) {
    EXPECT_EQ(rec.params, theta0);
    EXPECT_TRUE(rec.accepted.empty());
    EXPECT_EQ(rec.failed, rec.selected);
    EXPECT_EQ(rec.epsilon_glob, 0.0);
  }
  EXPECT_TRUE(res.ledger.entries().empty());
  EXPECT_FALSE(res.warnings.empty());
}

TEST(RunTrainingTest, NoiselessFullParticipationDecreasesLoss) {
  const double smoothness = 2.0;
  const int tau = 1;
  const double eta = 1.0 / (6 * tau * smoothness);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto problem = MakeProblem(5, 3, 2.0, seed);
    const auto clients = Objectives(problem);
    const auto cfg = Training(5, 5, 40, eta, eta, tau);
    const auto res = RunTraining(cfg, clients, std::vector<double>(3, 0.0),
                                 Privacy(cfg, 0.0, 1e-300), LossOf(problem));
    double prev = problem->GlobalLoss(res.initial_params);
    for (const auto& rec : res.records) {
      EXPECT_LE(rec.global_loss, prev + 1e-15);
      prev = rec.global_loss;
    }
  }
}

TEST(RunTrainingTest, RecordInvariants) {
  const auto problem = MakeProblem(10, 6, 1.0, 14);
  const auto clients = Objectives(problem);
  auto cfg = Training(10, 4, 20, 0.1, 0.1, 2);
  cfg.seed = 5;
  auto priv = Privacy(cfg, 1e-3, 0.05);
  priv.alpha = 0.5;
  const auto res = RunTraining(cfg, clients, std::vector<double>(6, 0.0), priv,
                               LossOf(problem));
  ASSERT_EQ(res.records.size(), 20u);
  const double eps_round = PerRoundEpsilon(priv);
  double expected_total = 0.0;
  double prev_eps = 0.0;
  for (std::size_t t = 0; t < res.records.size(); ++t) {
    const auto& rec = res.records[t];
    EXPECT_EQ(rec.round, static_cast<std::int64_t>(t));
    EXPECT_EQ(rec.selected.size(), 4u);
    EXPECT_TRUE(std::is_sorted(rec.selected.begin(), rec.selected.end()));
    EXPECT_TRUE(std::includes(rec.selected.begin(), rec.selected.end(),
                              rec.accepted.begin(), rec.accepted.end()));
    EXPECT_DOUBLE_EQ(rec.sigma_t_sq, 1e-3 / (1 + 0.5 * t));
    EXPECT_LE(rec.dropped_coordinates, rec.total_coordinates);
    EXPECT_LE(rec.max_deviation, priv.FilterRadius() + 1e-12);
    EXPECT_GE(rec.epsilon_glob, prev_eps);
    for (std::size_t i = 0; i < rec.selected.size() - rec.failed.size(); ++i) {
      expected_total += eps_round;
    }
    EXPECT_EQ(rec.epsilon_glob, expected_total);
    prev_eps = rec.epsilon_glob;
  }
  EXPECT_EQ(res.worst_filter_violation, 0.0);
}

TEST(RunTrainingTest, EnforceDpFloorsNoise) {
  const auto problem = MakeProblem(4, 2, 1.0, 15);
  const auto clients = Objectives(problem);
  auto cfg = Training(4, 2, 3, 0.1, 0.1, 1);
  cfg.enforce_dp = true;
  const auto priv = Privacy(cfg, 1e-6, 0.1);
  const auto res = RunTraining(cfg, clients, std::vector<double>(2, 0.0), priv,
                               LossOf(problem));
  for (const auto& rec : res.records) {
    EXPECT_DOUBLE_EQ(rec.sigma_t_sq, Lemma1SigmaSq(priv));
  }
}

TEST(RunTrainingTest, MismatchedInputs) {
  const auto problem = MakeProblem(4, 2, 1.0, 16);
  const auto clients = Objectives(problem);
  auto cfg = Training(5, 2, 3, 0.1, 0.1, 1);
  EXPECT_THROW(RunTraining(cfg, clients, std::vector<double>(2, 0.0),
                           Privacy(cfg, 0.0, 0.1), LossOf(problem)),
               ConfigError);
  cfg.clients = 4;
  auto priv = Privacy(cfg, 0.0, 0.1);
  priv.rounds = 4;
  EXPECT_THROW(RunTraining(cfg, clients, std::vector<double>(2, 0.0), priv,
                           LossOf(problem)),
               ConfigError);
  EXPECT_THROW(RunTraining(cfg, clients, std::vector<double>(3, 0.0),
                           Privacy(cfg, 0.0, 0.1), LossOf(problem)),
               StructuralError);
}

TEST(WriteRoundsCsvTest, Format) {
  RoundRecord r;
  r.round = 0;
  r.sigma_t_sq = 0.5;
  r.selected = {1, 3};
  r.accepted = {3};
  r.global_loss = 0.25;
  r.test_accuracy = 1.0;
  r.epsilon_glob = 2.0;
  std::ostringstream os;
  WriteRoundsCsv(os, {r});
  EXPECT_EQ(os.str(),
            "round,sigma_t_sq,selected,accepted,global_loss,test_accuracy,"
            "epsilon_glob\n0,0.5,1;3,3,0.25,1,2\n");
}

}  // namespace
}  // namespace qfl
