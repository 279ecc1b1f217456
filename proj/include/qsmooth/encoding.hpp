/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qsmooth/numerics.hpp"

namespace qsmooth {

// Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of a
// computational basis index.
inline std::size_t qubit_bit(std::size_t basis_index, std::size_t qubit, std::size_t qubits) {
  return (basis_index >> (qubits - 1 - qubit)) & 1U;
}

enum class Axis { X, Y, Z };

/// Single-qubit Pauli rotation whose angle is scale * x[feature].
struct RotationGate {
  Axis axis = Axis::Z;
  std::size_t qubit = 0;
  std::size_t feature = 0;
  double scale = 1.0;
};

/// exp(-i angle P / 2) for P in {X, Y, Z}; RZ(a) = diag(e^{-ia/2}, e^{ia/2}).
ComplexMatrix rotation_unitary(Axis axis, double angle);
inline ComplexMatrix rotation_unitary(const RotationGate& gate, double x) {
  return rotation_unitary(gate.axis, gate.scale * x);
}

/// I (x) ... (x) g (x) ... (x) I with g acting on `qubit`.
ComplexMatrix embed_single_qubit(const ComplexMatrix& gate, std::size_t qubit, std::size_t qubits);

/// One diagonal data-encoding block U(u) = diag(exp(-i lambda_k * scale * u)),
/// where u = x[feature_index].
struct EncodingLayer {
  std::vector<double> eigenvalues;
  std::size_t feature_index = 0;
  double scale = 1.0;
  /// RZ gates this layer was assembled from; empty for a generic diagonal Hamiltonian.
  std::vector<RotationGate> gates;

  static EncodingLayer diagonal(std::vector<double> eigenvalues, std::size_t feature, double scale = 1.0);

  std::size_t dim() const { return eigenvalues.size(); }
  std::size_t qubits() const { return log2_exact(eigenvalues.size()); }
  /// Entries exp(-i lambda_k * scale * u).
  std::vector<cplx> phases(double u) const;
};

/// Layer built from RZ(scale_g * x[feature]) on the given qubits of a `qubits`-wide register.
EncodingLayer rz_layer(std::size_t qubits, std::span<const std::pair<std::size_t, double>> qubit_scales,
                       std::size_t feature);

/// RZ(2^k x[feature]) on qubit k, k = 0..N-1.
EncodingLayer exponential_layer(std::size_t n_qubits, std::size_t feature);
/// Same gates placed on qubits first..first+N-1 of a wider register.
EncodingLayer exponential_layer(std::size_t register_qubits, std::size_t first_qubit, std::size_t n_qubits,
                                std::size_t feature, double input_scale = 1.0);

/// Ordered encoding layers with variational unitaries W inserted at gaps.
/// Slot s means "before layer s"; slot L (= layer count) is after the last layer.
struct EncodingSpec {
  std::size_t qubits = 0;
  std::vector<EncodingLayer> layers;
  std::vector<std::size_t> variational_slots;  // strictly increasing, each <= L
  std::optional<DensityMatrix> initial_state;  // |0...0> when absent

  std::size_t layer_count() const { return layers.size(); }
  std::size_t dim() const { return std::size_t{1} << qubits; }
  std::size_t feature_count() const;
  DensityMatrix rho0() const;

  /// Throws std::invalid_argument on inconsistent dimensions or slots.
  void validate() const;
};

/// Uniform superposition amplitudes over `qubits` qubits.
std::vector<cplx> uniform_superposition(std::size_t qubits);

/// rho_ij = gamma_i conj(gamma_j) exp(-i (lambda_i - lambda_j) scale x).
DensityMatrix parallel_state(const EncodingLayer& layer, double x, std::span<const cplx> gamma);
DensityMatrix parallel_state(const EncodingLayer& layer, double x);

/// Hook invoked on the working matrix right after layer `l` is applied.
using LayerHook = std::function<void(std::size_t layer, ComplexMatrix& rho)>;

/// Runs the sequential circuit with an explicit input per layer.
/// `variational[k]` is applied at `spec.variational_slots[k]`.
DensityMatrix sequential_state_layerwise(const EncodingSpec& spec, std::span<const double> layer_inputs,
                                         std::span<const ComplexMatrix> variational,
                                         const LayerHook& after_layer = {});

/// Layer l receives x[spec.layers[l].feature_index].
DensityMatrix sequential_state(const EncodingSpec& spec, std::span<const double> x,
                               std::span<const ComplexMatrix> variational);

/// Per-layer inputs x[feature_l]; throws if x is too short.
std::vector<double> layer_inputs(const EncodingSpec& spec, std::span<const double> x);

/// Validates unitarity of every variational block at `tol`.
void check_variational(const EncodingSpec& spec, std::span<const ComplexMatrix> variational, double tol = 1e-10);

}  // namespace qsmooth
