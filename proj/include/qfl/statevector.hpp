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

// Dense statevector simulation of small qubit registers.
//
// Conventions:
//  * Basis ordering is little-endian: qubit q is bit q of the basis index,
//    so qubit 0 is the least significant bit. The two-qubit basis state
//    written |q0 q1> = |10> is index 1.
//  * Rotations are R_P(theta) = exp(-i theta P / 2) for P in {X, Y, Z}.
//  * Everything is double-precision complex.

#ifndef QFL_STATEVECTOR_HPP_
#define QFL_STATEVECTOR_HPP_

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qfl/errors.hpp"

namespace qfl {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 16;

enum class GateKind { kRX, kRY, kRZ, kCNOT, kCZ, kH };

inline bool IsRotation(GateKind kind) {
  return kind == GateKind::kRX || kind == GateKind::kRY ||
         kind == GateKind::kRZ;
}

inline bool IsControlled(GateKind kind) {
  return kind == GateKind::kCNOT || kind == GateKind::kCZ;
}

inline const char* GateName(GateKind kind) {
  switch (kind) {
    case GateKind::kRX: return "RX";
    case GateKind::kRY: return "RY";
    case GateKind::kRZ: return "RZ";
    case GateKind::kCNOT: return "CNOT";
    case GateKind::kCZ: return "CZ";
    case GateKind::kH: return "H";
  }
  return "?";
}

// A gate acting on one or two wires. A rotation carries either a fixed
// angle or a reference into a parameter vector; in the latter case the
// applied angle is scale * params[param_index]. The scale lets a single
// trainable parameter drive the half-angle rotations of a controlled
// rotation decomposition.
struct Gate {
  GateKind kind = GateKind::kH;
  int target = 0;
  std::optional<int> control;
  std::optional<double> angle;
  std::optional<std::size_t> param_index;
  double scale = 1.0;

  static Gate Fixed(GateKind kind, int target, double angle) {
    Gate g;
    g.kind = kind;
    g.target = target;
    g.angle = angle;
    return g;
  }
  static Gate Trainable(GateKind kind, int target, std::size_t param_index,
                        double scale = 1.0) {
    Gate g;
    g.kind = kind;
    g.target = target;
    g.param_index = param_index;
    g.scale = scale;
    return g;
  }
  static Gate Cnot(int control, int target) {
    Gate g;
    g.kind = GateKind::kCNOT;
    g.control = control;
    g.target = target;
    return g;
  }
  static Gate Cz(int control, int target) {
    Gate g;
    g.kind = GateKind::kCZ;
    g.control = control;
    g.target = target;
    return g;
  }
  static Gate Hadamard(int target) {
    Gate g;
    g.kind = GateKind::kH;
    g.target = target;
    return g;
  }

  bool is_trainable() const { return param_index.has_value(); }
};

// Checks the structural invariants of `gate` against a register of
// `n_qubits` wires and a parameter vector of `n_params` entries.
inline void ValidateGate(const Gate& gate, int n_qubits, std::size_t n_params) {
  const std::string name = GateName(gate.kind);
  if (gate.target < 0 || gate.target >= n_qubits) {
    throw StructuralError(name + " target " + std::to_string(gate.target) +
                          " out of range for " + std::to_string(n_qubits) +
                          " qubits");
  }
  if (IsControlled(gate.kind)) {
    if (!gate.control) throw StructuralError(name + " requires a control");
    if (*gate.control < 0 || *gate.control >= n_qubits) {
      throw StructuralError(name + " control " +
                            std::to_string(*gate.control) + " out of range");
    }
    if (*gate.control == gate.target) {
      throw StructuralError(name + " control equals target");
    }
  } else if (gate.control) {
    throw StructuralError(name + " does not take a control");
  }
  if (IsRotation(gate.kind)) {
    if (gate.angle.has_value() == gate.param_index.has_value()) {
      throw StructuralError(name +
                            " needs exactly one of angle or param_index");
    }
    if (gate.param_index && *gate.param_index >= n_params) {
      throw StructuralError(name + " param_index " +
                            std::to_string(*gate.param_index) +
                            " out of range for " + std::to_string(n_params) +
                            " parameters");
    }
  } else if (gate.angle || gate.param_index) {
    throw StructuralError(name + " is not parameterized");
  }
}

inline double ResolveAngle(const Gate& gate, std::span<const double> params) {
  if (gate.param_index) return gate.scale * params[*gate.param_index];
  return gate.angle.value_or(0.0);
}

class StateVector {
 public:
  // |0...0> on n_qubits wires, 1 <= n_qubits <= kMaxQubits.
  static StateVector Zero(int n_qubits) { return Basis(n_qubits, 0); }

  static StateVector Basis(int n_qubits, std::size_t index) {
    CheckQubitCount(n_qubits);
    std::vector<Complex> amps(std::size_t{1} << n_qubits);
    if (index >= amps.size()) {
      throw StructuralError("basis index " + std::to_string(index) +
                            " out of range");
    }
    amps[index] = 1.0;
    return StateVector(n_qubits, std::move(amps));
  }

  // Wraps caller-provided amplitudes; the length must be 2^n_qubits.
  static StateVector FromAmplitudes(int n_qubits, std::vector<Complex> amps) {
    CheckQubitCount(n_qubits);
    if (amps.size() != (std::size_t{1} << n_qubits)) {
      throw StructuralError("amplitude count " + std::to_string(amps.size()) +
                            " does not match " + std::to_string(n_qubits) +
                            " qubits");
    }
    return StateVector(n_qubits, std::move(amps));
  }

  int n_qubits() const { return n_qubits_; }
  std::size_t size() const { return amps_.size(); }
  std::span<const Complex> amplitudes() const { return amps_; }
  const Complex& operator[](std::size_t i) const { return amps_[i]; }

  double NormSquared() const {
    double s = 0.0;
    for (const Complex& a : amps_) s += std::norm(a);
    return s;
  }

  // In-place gate application for callers that own the state.
  void Apply(const Gate& gate, std::span<const double> params) {
    ValidateGate(gate, n_qubits_, params.size());
    ApplyUnchecked(gate, ResolveAngle(gate, params));
  }

  // Applies `gate` with an explicit rotation angle, skipping validation.
  // Callers must have validated the gate against this register.
  void ApplyUnchecked(const Gate& gate, double angle) {
    switch (gate.kind) {
      case GateKind::kRX: ApplyRx(gate.target, angle); break;
      case GateKind::kRY: ApplyRy(gate.target, angle); break;
      case GateKind::kRZ: ApplyRz(gate.target, angle); break;
      case GateKind::kH: ApplyH(gate.target); break;
      case GateKind::kCNOT: ApplyCnot(*gate.control, gate.target); break;
      case GateKind::kCZ: ApplyCz(*gate.control, gate.target); break;
    }
  }

  void ApplyRy(int q, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    ForEachPair(q, [c, s](Complex& a0, Complex& a1) {
      const Complex x = a0;
      const Complex y = a1;
      a0 = Complex(c * x.real() - s * y.real(), c * x.imag() - s * y.imag());
      a1 = Complex(s * x.real() + c * y.real(), s * x.imag() + c * y.imag());
    });
  }

  void ApplyRx(int q, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    // [[c, -i s], [-i s, c]]; -i s (u + i v) = s v - i s u.
    ForEachPair(q, [c, s](Complex& a0, Complex& a1) {
      const Complex x = a0;
      const Complex y = a1;
      a0 = Complex(c * x.real() + s * y.imag(), c * x.imag() - s * y.real());
      a1 = Complex(s * x.imag() + c * y.real(), -s * x.real() + c * y.imag());
    });
  }

  void ApplyRz(int q, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    // diag(e^{-i theta/2}, e^{+i theta/2}).
    ForEachPair(q, [c, s](Complex& a0, Complex& a1) {
      const Complex x = a0;
      const Complex y = a1;
      a0 = Complex(c * x.real() + s * x.imag(), c * x.imag() - s * x.real());
      a1 = Complex(c * y.real() - s * y.imag(), c * y.imag() + s * y.real());
    });
  }

  void ApplyH(int q) {
    const double r = M_SQRT1_2;
    ForEachPair(q, [r](Complex& a0, Complex& a1) {
      const Complex x = a0;
      const Complex y = a1;
      a0 = Complex(r * (x.real() + y.real()), r * (x.imag() + y.imag()));
      a1 = Complex(r * (x.real() - y.real()), r * (x.imag() - y.imag()));
    });
  }

  void ApplyCnot(int control, int target) {
    const std::size_t cmask = std::size_t{1} << control;
    const std::size_t tmask = std::size_t{1} << target;
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      if ((i & cmask) && !(i & tmask)) std::swap(amps_[i], amps_[i | tmask]);
    }
  }

  void ApplyCz(int control, int target) {
    const std::size_t mask =
        (std::size_t{1} << control) | (std::size_t{1} << target);
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      if ((i & mask) == mask) amps_[i] = -amps_[i];
    }
  }

 private:
  StateVector(int n_qubits, std::vector<Complex> amps)
      : n_qubits_(n_qubits), amps_(std::move(amps)) {}

  static void CheckQubitCount(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
      throw ConfigError("n_qubits", "must be in [1, " +
                                        std::to_string(kMaxQubits) +
                                        "], got " + std::to_string(n_qubits));
    }
  }

  // Calls f(amp[i], amp[i | bit_q]) for every index i with bit q clear.
  template <typename F>
  void ForEachPair(int q, F&& f) {
    const std::size_t stride = std::size_t{1} << q;
    const std::size_t n = amps_.size();
    Complex* a = amps_.data();
    for (std::size_t base = 0; base < n; base += 2 * stride) {
      for (std::size_t i = base; i < base + stride; ++i) f(a[i], a[i + stride]);
    }
  }

  int n_qubits_;
  std::vector<Complex> amps_;
};

inline StateVector InitZero(int n_qubits) { return StateVector::Zero(n_qubits); }

// Returns U(gate) |state>; the input is left untouched.
inline StateVector ApplyGate(StateVector state, const Gate& gate,
                             std::span<const double> params = {}) {
  state.Apply(gate, params);
  return state;
}

// <Z_qubit> = sum_i (+1 if bit clear else -1) |amp_i|^2.
inline double ExpectationZ(const StateVector& state, int qubit) {
  if (qubit < 0 || qubit >= state.n_qubits()) {
    throw StructuralError("expectation qubit " + std::to_string(qubit) +
                          " out of range");
  }
  const std::size_t mask = std::size_t{1} << qubit;
  double e = 0.0;
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    e += (i & mask) ? -p : p;
  }
  return e;
}

// <0...0| rho |0...0>, the expectation of the projector onto the all-zero
// basis state. Equivalent to the expectation of prod_q (I + Z_q) / 2.
inline double ZeroStateProbability(const StateVector& state) {
  return std::norm(state[0]);
}

}  // namespace qfl

#endif  // QFL_STATEVECTOR_HPP_
