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

#include "qfl/qnn.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "qfl/analysis.hpp"
#include "qfl/errors.hpp"

namespace qfl {
namespace {

constexpr double kPi = std::numbers::pi;

QnnModel EmptyModel(int n) {
  QnnModel m;
  m.circuit.n_qubits = n;
  return m;
}

// A random 4-qubit model: trainable rotations interleaved with CNOTs, some
// parameters shared with scale factors.
QnnModel RandomModel(std::mt19937_64& rng, int n = 4, int n_params = 10) {
  std::uniform_int_distribution<int> wire(0, n - 1);
  std::uniform_int_distribution<int> axis(0, 2);
  std::uniform_int_distribution<int> param(0, n_params - 1);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  constexpr GateKind kAxes[] = {GateKind::kRX, GateKind::kRY, GateKind::kRZ};
  QnnModel m;
  m.circuit.n_qubits = n;
  m.circuit.param_count = n_params;
  for (int k = 0; k < 3 * n_params; ++k) {
    const double scale = (k % 5 == 0) ? -0.5 : 1.0;
    m.circuit.gates.push_back(
        Gate::Trainable(kAxes[axis(rng)], wire(rng), param(rng), scale));
    const int c = wire(rng);
    const int t = (c + 1) % n;
    m.circuit.gates.push_back(Gate::Cnot(c, t));
  }
  m.params.resize(n_params);
  for (double& p : m.params) p = angle(rng);
  m.readout_qubit = wire(rng);
  return m;
}

Batch RandomBatch(std::mt19937_64& rng, int n, int size) {
  std::uniform_real_distribution<double> x(0.0, kPi);
  std::uniform_real_distribution<double> y(0.0, 1.0);
  Batch b;
  for (int i = 0; i < size; ++i) {
    std::vector<double> f(n);
    for (double& v : f) v = x(rng);
    b.inputs.push_back(f);
    b.labels.push_back(y(rng));
  }
  return b;
}

std::vector<double> FiniteDifferenceGradient(const QnnModel& m, const Batch& b,
                                             double h) {
  std::vector<double> g(m.params.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    auto up = m.params;
    auto down = m.params;
    up[j] += h;
    down[j] -= h;
    g[j] = (BatchLoss(m, up, b) - BatchLoss(m, down, b)) / (2 * h);
  }
  return g;
}

TEST(EncodeTest, ZeroAnglesGiveGroundState) {
  const std::vector<double> x = {0.0, 0.0};
  const auto s = Encode(x, 2);
  EXPECT_DOUBLE_EQ(std::abs(s[0]), 1.0);
}

TEST(EncodeTest, PiFlipsQubit) {
  const std::vector<double> x = {kPi};
  const auto s = Encode(x, 1);
  // RY(pi)|0> = [cos(pi/2), sin(pi/2)].
  EXPECT_NEAR(std::abs(s[1]), 1.0, 1e-15);
  EXPECT_NEAR(ExpectationZ(s, 0), -1.0, 1e-15);
}

TEST(EncodeTest, HalfPiIsBalanced) {
  const std::vector<double> x = {kPi / 2};
  EXPECT_NEAR(ExpectationZ(Encode(x, 1), 0), 0.0, 1e-10);
}

TEST(EncodeTest, UnusedQubitsStayZero) {
  const std::vector<double> x = {kPi};
  const auto s = Encode(x, 3);
  EXPECT_NEAR(ExpectationZ(s, 1), 1.0, 1e-15);
  EXPECT_NEAR(ExpectationZ(s, 2), 1.0, 1e-15);
}

TEST(EncodeTest, RejectsOutOfRange) {
  const std::vector<double> neg = {-0.1};
  const std::vector<double> big = {3.2};
  const std::vector<double> too_many = {0.1, 0.2, 0.3};
  EXPECT_THROW(Encode(neg, 1), InputError);
  EXPECT_THROW(Encode(big, 1), InputError);
  EXPECT_THROW(Encode(too_many, 2), InputError);
}

TEST(ForwardTest, EmptyCircuit) {
  const QnnModel m = EmptyModel(1);
  const std::vector<double> zero = {0.0};
  const std::vector<double> pi = {kPi};
  EXPECT_DOUBLE_EQ(Forward(m, zero), 1.0);
  EXPECT_NEAR(Forward(m, pi), 0.0, 1e-15);
}

TEST(ForwardTest, OutputInUnitInterval) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto m = RandomModel(rng);
    const auto b = RandomBatch(rng, 4, 4);
    for (const auto& x : b.inputs) {
      const double y = Forward(m, x);
      EXPECT_GE(y, 0.0);
      EXPECT_LE(y, 1.0);
    }
  }
}

TEST(ForwardTest, PeriodicInEveryParameter) {
  std::mt19937_64 rng(4);
  const auto m = RandomModel(rng);
  const auto b = RandomBatch(rng, 4, 3);
  for (std::size_t j = 0; j < m.params.size(); ++j) {
    // Parameters with scale -0.5 are 4 pi periodic; 4 pi covers both.
    auto shifted = m.params;
    shifted[j] += 4 * kPi;
    for (const auto& x : b.inputs) {
      EXPECT_NEAR(Forward(m, m.params, x), Forward(m, shifted, x), 1e-10);
    }
  }
}

TEST(ForwardTest, UnitScaleParametersAre2PiPeriodic) {
  QnnModel m;
  m.circuit.n_qubits = 2;
  m.circuit.param_count = 2;
  m.circuit.gates = {Gate::Trainable(GateKind::kRY, 0, 0), Gate::Cnot(0, 1),
                     Gate::Trainable(GateKind::kRX, 1, 1)};
  m.readout_qubit = 1;
  m.params = {0.3, -1.2};
  const std::vector<double> x = {0.4, 2.0};
  for (std::size_t j = 0; j < 2; ++j) {
    auto p = m.params;
    p[j] += 2 * kPi;
    EXPECT_NEAR(Forward(m, p, x), Forward(m, x), 1e-10);
  }
}

TEST(LossMseTest, Examples) {
  EXPECT_DOUBLE_EQ(LossMse(0.5, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(LossMse(1.0, 0.0), 1.0);
  EXPECT_NEAR(LossMse(0.3, 0.7), 0.16, 1e-15);
}

TEST(GradParameterShiftTest, StationaryPointHasZeroGradient) {
  // Single RY(theta) at theta = 0: prediction cos^2(theta/2) is extremal.
  QnnModel m;
  m.circuit.n_qubits = 1;
  m.circuit.param_count = 1;
  m.circuit.gates = {Gate::Trainable(GateKind::kRY, 0, 0)};
  m.params = {0.0};
  Batch b;
  b.inputs = {{0.0}};
  b.labels = {0.0};
  EXPECT_NEAR(GradParameterShift(m, b)[0], 0.0, 1e-8);
}

TEST(GradParameterShiftTest, SingleRotationClosedForm) {
  // pred = cos^2(theta/2) = (1 + cos theta)/2, dpred = -sin(theta)/2.
  QnnModel m;
  m.circuit.n_qubits = 1;
  m.circuit.param_count = 1;
  m.circuit.gates = {Gate::Trainable(GateKind::kRY, 0, 0)};
  m.params = {0.8};
  Batch b;
  b.inputs = {{0.0}};
  b.labels = {0.25};
  const double pred = (1 + std::cos(0.8)) / 2;
  const double want = 2 * (pred - 0.25) * (-std::sin(0.8) / 2);
  EXPECT_NEAR(GradParameterShift(m, b)[0], want, 1e-14);
}

TEST(GradParameterShiftTest, DeadParameterHasZeroGradient) {
  std::mt19937_64 rng(5);
  auto m = RandomModel(rng);
  m.circuit.param_count += 1;
  m.params.push_back(0.9);
  const auto b = RandomBatch(rng, 4, 5);
  EXPECT_EQ(GradParameterShift(m, b).back(), 0.0);
}

TEST(GradParameterShiftTest, EmptyBatchIsInputError) {
  std::mt19937_64 rng(6);
  EXPECT_THROW(GradParameterShift(RandomModel(rng), Batch{}), InputError);
}

// Property: parameter shift agrees with central differences on 50 random
// (model, batch) pairs.
TEST(GradParameterShiftTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 50; ++t) {
    auto m = RandomModel(rng);
    m.readout = (t % 2) ? Readout::kGlobalZero : Readout::kLocalZ;
    const auto b = RandomBatch(rng, 4, 3);
    const auto g = GradParameterShift(m, b);
    const auto fd = FiniteDifferenceGradient(m, b, 1e-4);
    for (std::size_t j = 0; j < g.size(); ++j) {
      ASSERT_NEAR(g[j], fd[j], 1e-5) << "trial " << t << " param " << j;
    }
  }
}

TEST(GradParameterShiftTest, QcnnMatchesFiniteDifferences) {
  auto stream = DeriveStream({11});
  const QnnModel m = MakeQcnnModel(8, 3, 1.0, stream);
  std::mt19937_64 rng(8);
  const auto b = RandomBatch(rng, 8, 2);
  const auto g = GradParameterShift(m, b);
  const auto fd = FiniteDifferenceGradient(m, b, 1e-4);
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(g[j], fd[j], 1e-5);
}

TEST(GradParameterShiftTest, SubsetIsMeanOfSelected) {
  std::mt19937_64 rng(9);
  const auto m = RandomModel(rng);
  const auto b = RandomBatch(rng, 4, 6);
  const std::vector<std::size_t> idx = {1, 4};
  const auto g = GradParameterShift(m, m.params, b, idx);
  Batch sub;
  for (std::size_t i : idx) {
    sub.inputs.push_back(b.inputs[i]);
    sub.labels.push_back(b.labels[i]);
  }
  const auto want = GradParameterShift(m, sub);
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(g[j], want[j], 1e-15);
}

TEST(QcnnAnsatzTest, EightQubitThreeBlocksHas64Parameters) {
  const ParamCircuit c = QcnnAnsatz(8, 3);
  EXPECT_EQ(c.param_count, 64u);
  EXPECT_NO_THROW(c.Validate());
  // Every parameter is referenced by at least one gate.
  std::vector<int> used(64, 0);
  for (const auto& g : c.gates) {
    if (g.is_trainable()) used[*g.param_index] = 1;
  }
  for (int j = 0; j < 64; ++j) EXPECT_EQ(used[j], 1) << j;
}

TEST(QcnnAnsatzTest, SingleReadoutQubitRemains) {
  EXPECT_EQ(QcnnActiveQubits(8, 3).size(), 1u);
  EXPECT_EQ(QcnnActiveQubits(8, 3).front(), 0);
  EXPECT_EQ(QcnnActiveQubits(8, 1), (std::vector<int>{0, 2, 4, 6}));
}

TEST(QcnnAnsatzTest, IncompatibleShapes) {
  EXPECT_THROW(QcnnAnsatz(4, 3), ConfigError);
  EXPECT_THROW(QcnnAnsatz(6, 1), ConfigError);
  EXPECT_THROW(QcnnAnsatz(8, 0), ConfigError);
  EXPECT_NO_THROW(QcnnAnsatz(4, 2));
}

TEST(QcnnAnsatzTest, TailUsesOnlyReadoutQubitAfterPooling) {
  const ParamCircuit c = QcnnAnsatz(8, 3);
  for (std::size_t i = c.gates.size() - kQcnnTailRotations; i < c.gates.size();
       ++i) {
    EXPECT_EQ(c.gates[i].target, 0);
    EXPECT_TRUE(IsRotation(c.gates[i].kind));
  }
}

TEST(RandomLayeredCircuitTest, Deterministic) {
  const auto a = RandomLayeredCircuit(4, 5, 77);
  const auto b = RandomLayeredCircuit(4, 5, 77);
  ASSERT_EQ(a.circuit.gates.size(), b.circuit.gates.size());
  for (std::size_t i = 0; i < a.circuit.gates.size(); ++i) {
    EXPECT_EQ(a.circuit.gates[i].kind, b.circuit.gates[i].kind);
    EXPECT_EQ(a.circuit.gates[i].target, b.circuit.gates[i].target);
    EXPECT_EQ(a.circuit.gates[i].angle, b.circuit.gates[i].angle);
  }
  EXPECT_EQ(a.params, b.params);
  const auto c = RandomLayeredCircuit(4, 5, 78);
  EXPECT_NE(a.params, c.params);
}

TEST(RandomLayeredCircuitTest, GateCount) {
  for (int n : {2, 3, 6}) {
    for (int layers : {1, 4, 20}) {
      const auto lc = RandomLayeredCircuit(n, layers, 1);
      EXPECT_EQ(lc.circuit.gates.size(),
                static_cast<std::size_t>(layers * (n + n - 1)));
      EXPECT_EQ(lc.circuit.TrainableGateCount(), 1u);
      EXPECT_EQ(lc.params.size(), 1u);
    }
  }
}

TEST(RandomLayeredCircuitTest, RangeChecks) {
  EXPECT_THROW(RandomLayeredCircuit(1, 5, 0), ConfigError);
  EXPECT_THROW(RandomLayeredCircuit(3, 0, 0), ConfigError);
}

TEST(RandomLayeredCircuitTest, VarianceDecaysFromTwoToSixQubits) {
  for (Readout r : {Readout::kLocalZ, Readout::kGlobalZero}) {
    const auto rows = BarrenPlateauScan({2, 6}, {20}, 200, 5, r);
    EXPECT_LT(rows[1].sample_variance, rows[0].sample_variance) << ReadoutName(r);
  }
}

TEST(RandomLayeredCircuitTest, VarianceMonotoneWithLawSlope) {
  const auto rows = BarrenPlateauScan({2, 4, 6, 8}, {20}, 200, 21);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LE(rows[i].sample_variance, rows[i - 1].sample_variance);
  }
  const double slope = Log2VarianceSlope(rows);
  EXPECT_GE(slope, -2.6);
  EXPECT_LE(slope, -1.4);
}

TEST(DesignatedGradientTest, MatchesFiniteDifference) {
  const auto lc = RandomLayeredCircuit(3, 6, 5);
  const double g = DesignatedGradient(lc, Readout::kLocalZ);
  auto f = [&](double theta) {
    StateVector s = InitZero(3);
    const std::vector<double> p = {theta};
    RunCircuit(lc.circuit, p, s);
    return ReadoutValue(s, Readout::kLocalZ, 0);
  };
  const double h = 1e-5;
  EXPECT_NEAR(g, (f(lc.params[0] + h) - f(lc.params[0] - h)) / (2 * h), 1e-8);
}

}  // namespace
}  // namespace qfl
