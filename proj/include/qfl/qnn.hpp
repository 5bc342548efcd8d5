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

// Parameterized quantum models: angle encoding, forward pass, MSE loss,
// parameter-shift gradients, the QCNN ansatz and random layered circuits.

#ifndef QFL_QNN_HPP_
#define QFL_QNN_HPP_

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qfl/circuit.hpp"
#include "qfl/errors.hpp"
#include "qfl/random.hpp"
#include "qfl/statevector.hpp"

namespace qfl {

// How a final state is turned into a prediction in [0, 1].
enum class Readout {
  // (<Z_q> + 1) / 2 on the readout qubit.
  kLocalZ,
  // <0...0|rho|0...0>, a global observable. Its gradient variance over
  // random circuits decays like 1 / (2^{2n} - 1), whereas a single-qubit
  // Pauli observable only decays like 1 / (2^n + 1).
  kGlobalZero,
};

inline const char* ReadoutName(Readout r) {
  return r == Readout::kLocalZ ? "local_z" : "global_zero";
}

struct QnnModel {
  ParamCircuit circuit;
  std::vector<double> params;
  int readout_qubit = 0;
  Readout readout = Readout::kLocalZ;

  int n_qubits() const { return circuit.n_qubits; }

  void Validate() const {
    circuit.Validate();
    if (params.size() != circuit.param_count) {
      throw StructuralError("model has " + std::to_string(params.size()) +
                            " parameters, circuit expects " +
                            std::to_string(circuit.param_count));
    }
    if (readout_qubit < 0 || readout_qubit >= circuit.n_qubits) {
      throw StructuralError("readout qubit out of range");
    }
  }
};

struct Batch {
  std::vector<std::vector<double>> inputs;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
};

// prod_i RY(features_i) on qubit i applied to |0...0>. Features must lie in
// [0, pi]; unused qubits stay in |0>.
inline StateVector Encode(std::span<const double> features, int n_qubits) {
  StateVector state = StateVector::Zero(n_qubits);
  if (features.size() > static_cast<std::size_t>(n_qubits)) {
    throw InputError("feature dimension " + std::to_string(features.size()) +
                     " exceeds " + std::to_string(n_qubits) + " qubits");
  }
  constexpr double kSlack = 1e-12;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double x = features[i];
    if (!(x >= -kSlack && x <= std::numbers::pi + kSlack)) {
      throw InputError("feature " + std::to_string(i) + " = " +
                       std::to_string(x) + " outside [0, pi]");
    }
    state.ApplyRy(static_cast<int>(i), x);
  }
  return state;
}

inline double ReadoutValue(const StateVector& state, Readout readout,
                           int qubit) {
  if (readout == Readout::kGlobalZero) return ZeroStateProbability(state);
  return 0.5 * (ExpectationZ(state, qubit) + 1.0);
}

inline double Forward(const QnnModel& model, std::span<const double> params,
                      std::span<const double> features) {
  StateVector state = Encode(features, model.n_qubits());
  RunCircuit(model.circuit, params, state);
  return ReadoutValue(state, model.readout, model.readout_qubit);
}

inline double Forward(const QnnModel& model, std::span<const double> features) {
  return Forward(model, model.params, features);
}

inline double LossMse(double pred, double label) {
  const double d = pred - label;
  return d * d;
}

inline double BatchLoss(const QnnModel& model, std::span<const double> params,
                        const Batch& batch) {
  if (batch.empty()) throw InputError("empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    s += LossMse(Forward(model, params, batch.inputs[i]), batch.labels[i]);
  }
  return s / static_cast<double>(batch.size());
}

inline double BatchLoss(const QnnModel& model, const Batch& batch) {
  return BatchLoss(model, model.params, batch);
}

// Parameter-shift derivative of the prediction for a circuit that starts
// from `initial`. Each trainable gate occurrence is shifted by +-pi/2 in its
// own angle; a gate angle scale*theta_j contributes
// scale * [f(+pi/2) - f(-pi/2)] / 2 to d f / d theta_j. `grad` is
// overwritten. Returns the unshifted prediction.
inline double ShiftRuleGradient(const ParamCircuit& circuit,
                                std::span<const double> params,
                                const StateVector& initial, Readout readout,
                                int readout_qubit, std::span<double> grad) {
  constexpr double kShift = std::numbers::pi / 2.0;
  for (double& g : grad) g = 0.0;
  StateVector prefix = initial;
  const std::size_t n_gates = circuit.gates.size();
  for (std::size_t i = 0; i < n_gates; ++i) {
    const Gate& gate = circuit.gates[i];
    const double angle = ResolveAngle(gate, params);
    if (gate.is_trainable()) {
      StateVector plus = prefix;
      plus.ApplyUnchecked(gate, angle + kShift);
      RunGates(circuit, params, i + 1, n_gates, plus);
      StateVector minus = prefix;
      minus.ApplyUnchecked(gate, angle - kShift);
      RunGates(circuit, params, i + 1, n_gates, minus);
      grad[*gate.param_index] +=
          gate.scale * 0.5 *
          (ReadoutValue(plus, readout, readout_qubit) -
           ReadoutValue(minus, readout, readout_qubit));
    }
    prefix.ApplyUnchecked(gate, angle);
  }
  return ReadoutValue(prefix, readout, readout_qubit);
}

// d prediction / d params for one input. Returns the prediction.
inline double OutputGradient(const QnnModel& model,
                             std::span<const double> params,
                             std::span<const double> features,
                             std::span<double> grad) {
  return ShiftRuleGradient(model.circuit, params,
                           Encode(features, model.n_qubits()), model.readout,
                           model.readout_qubit, grad);
}

// Gradient of the mean-squared-error loss of `model` evaluated at `params`
// over the samples of `batch` selected by `indices`, chained through the
// parameter-shift derivative of each prediction. Summation runs in index
// order.
inline std::vector<double> GradParameterShift(const QnnModel& model,
                                              std::span<const double> params,
                                              const Batch& batch,
                                              std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("empty batch");
  if (params.size() != model.circuit.param_count) {
    throw StructuralError("parameter vector length mismatch");
  }
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> dpred(params.size());
  for (std::size_t idx : indices) {
    const double pred = OutputGradient(model, params, batch.inputs[idx], dpred);
    const double w = 2.0 * (pred - batch.labels[idx]);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += w * dpred[j];
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (double& g : grad) g *= inv;
  return grad;
}

inline std::vector<std::size_t> IndexRange(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// Full-batch gradient of the mean MSE loss at model.params.
inline std::vector<double> GradParameterShift(const QnnModel& model,
                                              const Batch& batch) {
  model.Validate();
  if (batch.empty()) throw InputError("empty batch");
  const auto idx = IndexRange(batch.size());
  return GradParameterShift(model, model.params, batch, idx);
}

// ---------------------------------------------------------------------------
// Ansatz builders.

// Number of single-qubit rotations in the tail on the readout qubit. Sized so
// that the 8-qubit, 3-block QCNN has exactly 64 trainable parameters.
inline constexpr std::size_t kQcnnTailRotations = 13;

// Active wires after `blocks` conv/pool blocks on `n_qubits` wires. Pooling
// keeps the even positions of the active list.
inline std::vector<int> QcnnActiveQubits(int n_qubits, int blocks) {
  std::vector<int> active(n_qubits);
  for (int q = 0; q < n_qubits; ++q) active[q] = q;
  for (int b = 0; b < blocks; ++b) {
    std::vector<int> kept;
    for (std::size_t i = 0; i < active.size(); i += 2) kept.push_back(active[i]);
    active = std::move(kept);
  }
  return active;
}

// Quantum convolutional network on n_qubits wires with `blocks`
// convolution/pooling pairs.
//
//  conv: on every adjacent pair of active wires (even pairs first, then odd
//        pairs) apply RY(a) RY(b) on the two wires, CNOT, then RY(c) RY(d).
//  pool: for each pair (keep, drop) of active wires apply a controlled
//        RY(theta) with control `drop` and target `keep`, decomposed as
//        RY(theta/2) CNOT RY(-theta/2) CNOT on one shared parameter; `drop`
//        is then parked.
//  tail: kQcnnTailRotations rotations cycling RY, RX, RZ on the single
//        remaining wire, which is the readout qubit.
//
// n_qubits must be a power of two with n_qubits >= 2^blocks.
inline ParamCircuit QcnnAnsatz(int n_qubits, int blocks) {
  if (blocks < 1) throw ConfigError("conv_pool_pairs", "must be >= 1");
  if (n_qubits < 2 || n_qubits > kMaxQubits ||
      (n_qubits & (n_qubits - 1)) != 0) {
    throw ConfigError("n_qubits", "QCNN needs a power of two in [2, " +
                                      std::to_string(kMaxQubits) + "], got " +
                                      std::to_string(n_qubits));
  }
  if ((1 << blocks) > n_qubits) {
    throw ConfigError("conv_pool_pairs",
                      "cannot halve " + std::to_string(n_qubits) +
                          " qubits " + std::to_string(blocks) + " times");
  }
  ParamCircuit c;
  c.n_qubits = n_qubits;
  std::size_t p = 0;
  auto conv_unit = [&](int a, int b) {
    c.gates.push_back(Gate::Trainable(GateKind::kRY, a, p++));
    c.gates.push_back(Gate::Trainable(GateKind::kRY, b, p++));
    c.gates.push_back(Gate::Cnot(a, b));
    c.gates.push_back(Gate::Trainable(GateKind::kRY, a, p++));
    c.gates.push_back(Gate::Trainable(GateKind::kRY, b, p++));
  };
  std::vector<int> active = QcnnActiveQubits(n_qubits, 0);
  for (int b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i + 1 < active.size(); i += 2) {
      conv_unit(active[i], active[i + 1]);
    }
    for (std::size_t i = 1; i + 1 < active.size(); i += 2) {
      conv_unit(active[i], active[i + 1]);
    }
    std::vector<int> kept;
    for (std::size_t i = 0; i + 1 < active.size(); i += 2) {
      const int keep = active[i];
      const int drop = active[i + 1];
      c.gates.push_back(Gate::Trainable(GateKind::kRY, keep, p, 0.5));
      c.gates.push_back(Gate::Cnot(drop, keep));
      c.gates.push_back(Gate::Trainable(GateKind::kRY, keep, p, -0.5));
      c.gates.push_back(Gate::Cnot(drop, keep));
      ++p;
      kept.push_back(keep);
    }
    active = std::move(kept);
  }
  const int readout = active.front();
  constexpr GateKind kTailCycle[] = {GateKind::kRY, GateKind::kRX,
                                     GateKind::kRZ};
  for (std::size_t i = 0; i < kQcnnTailRotations; ++i) {
    c.gates.push_back(Gate::Trainable(kTailCycle[i % 3], readout, p++));
  }
  c.param_count = p;
  return c;
}

// A QCNN model with parameters drawn uniformly from [-init_scale,
// init_scale].
inline QnnModel MakeQcnnModel(int n_qubits, int blocks, double init_scale,
                              RandomStream& stream) {
  QnnModel m;
  m.circuit = QcnnAnsatz(n_qubits, blocks);
  m.readout_qubit = QcnnActiveQubits(n_qubits, blocks).front();
  m.params.resize(m.circuit.param_count);
  std::uniform_real_distribution<double> u(-init_scale, init_scale);
  for (double& v : m.params) v = u(stream);
  return m;
}

struct LayeredCircuit {
  ParamCircuit circuit;
  // Holds a single entry: the angle of the designated rotation.
  std::vector<double> params;
};

// Random layered circuit for gradient-variance experiments. Each layer
// applies one rotation per qubit, its axis drawn uniformly from {X, Y, Z}
// and its angle from Uniform[0, 2 pi), followed by a CNOT ladder
// (0->1, 1->2, ...). The rotation on qubit 0 in the final layer is the
// designated trainable parameter (index 0); all others are fixed angles.
inline LayeredCircuit RandomLayeredCircuit(int n_qubits, int layers,
                                           std::uint64_t seed) {
  if (n_qubits < 2 || n_qubits > kMaxQubits) {
    throw ConfigError("n_qubits", "layered circuit needs [2, " +
                                      std::to_string(kMaxQubits) + "] qubits");
  }
  if (layers < 1) throw ConfigError("layers", "must be >= 1");
  RandomStream stream(seed);
  std::uniform_int_distribution<int> axis(0, 2);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  constexpr GateKind kAxes[] = {GateKind::kRX, GateKind::kRY, GateKind::kRZ};

  LayeredCircuit out;
  out.circuit.n_qubits = n_qubits;
  out.circuit.param_count = 1;
  for (int l = 0; l < layers; ++l) {
    for (int q = 0; q < n_qubits; ++q) {
      const GateKind kind = kAxes[axis(stream)];
      const double a = angle(stream);
      if (l == layers - 1 && q == 0) {
        out.circuit.gates.push_back(Gate::Trainable(kind, q, 0));
        out.params.push_back(a);
      } else {
        out.circuit.gates.push_back(Gate::Fixed(kind, q, a));
      }
    }
    for (int q = 0; q + 1 < n_qubits; ++q) {
      out.circuit.gates.push_back(Gate::Cnot(q, q + 1));
    }
  }
  return out;
}

// d <readout> / d theta of the designated parameter of a layered circuit
// run from |0...0>.
inline double DesignatedGradient(const LayeredCircuit& lc, Readout readout) {
  double grad = 0.0;
  ShiftRuleGradient(lc.circuit, lc.params,
                    StateVector::Zero(lc.circuit.n_qubits), readout, 0,
                    std::span<double>(&grad, 1));
  return grad;
}

}  // namespace qfl

#endif  // QFL_QNN_HPP_
