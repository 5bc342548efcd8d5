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

#ifndef QFL_CIRCUIT_HPP_
#define QFL_CIRCUIT_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qfl/errors.hpp"
#include "qfl/statevector.hpp"

namespace qfl {

// A gate sequence over a fixed register whose trainable rotations index
// into a parameter vector of length param_count.
struct ParamCircuit {
  int n_qubits = 1;
  std::vector<Gate> gates;
  std::size_t param_count = 0;

  void Validate() const {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
      throw ConfigError("n_qubits", "out of range: " + std::to_string(n_qubits));
    }
    for (const Gate& g : gates) ValidateGate(g, n_qubits, param_count);
  }

  std::size_t TrainableGateCount() const {
    std::size_t n = 0;
    for (const Gate& g : gates) n += g.is_trainable() ? 1 : 0;
    return n;
  }
};

// Applies gates [first, last) of `circuit` to `state`. The circuit must
// already be validated.
inline void RunGates(const ParamCircuit& circuit, std::span<const double> params,
                     std::size_t first, std::size_t last, StateVector& state) {
  for (std::size_t i = first; i < last; ++i) {
    const Gate& g = circuit.gates[i];
    state.ApplyUnchecked(g, ResolveAngle(g, params));
  }
}

inline void RunCircuit(const ParamCircuit& circuit,
                       std::span<const double> params, StateVector& state) {
  if (state.n_qubits() != circuit.n_qubits) {
    throw StructuralError("state has " + std::to_string(state.n_qubits()) +
                          " qubits, circuit expects " +
                          std::to_string(circuit.n_qubits));
  }
  if (params.size() < circuit.param_count) {
    throw StructuralError("circuit needs " +
                          std::to_string(circuit.param_count) +
                          " parameters, got " + std::to_string(params.size()));
  }
  RunGates(circuit, params, 0, circuit.gates.size(), state);
}

}  // namespace qfl

#endif  // QFL_CIRCUIT_HPP_
