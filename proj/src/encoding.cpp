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

#include "qsmooth/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qsmooth {

ComplexMatrix rotation_unitary(Axis axis, double angle) {
  const cplx i{0.0, 1.0};
  const ComplexMatrix rz = ComplexMatrix::diagonal(std::vector<cplx>{std::exp(-i * angle / 2.0), std::exp(i * angle / 2.0)});
  const double h = 1.0 / std::sqrt(2.0);
  switch (axis) {
    case Axis::Z:
      return rz;
    case Axis::X: {
      const ComplexMatrix had(2, 2, {h, h, h, -h});
      return had * rz * had;
    }
    case Axis::Y: {
      // Columns are the +1 / -1 eigenvectors of Pauli Y.
      const ComplexMatrix vy(2, 2, {h, h, i * h, -i * h});
      return vy * rz * vy.adjoint();
    }
  }
  throw std::invalid_argument("rotation_unitary: unknown axis");
}

ComplexMatrix embed_single_qubit(const ComplexMatrix& gate, std::size_t qubit, std::size_t qubits) {
  if (gate.rows() != 2 || gate.cols() != 2) throw std::invalid_argument("embed_single_qubit: gate must be 2x2");
  if (qubit >= qubits) throw std::invalid_argument("embed_single_qubit: qubit out of range");
  const std::size_t dim = std::size_t{1} << qubits;
  ComplexMatrix out(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    const std::size_t rb = qubit_bit(r, qubit, qubits);
    const std::size_t mask = std::size_t{1} << (qubits - 1 - qubit);
    const std::size_t c0 = r & ~mask;
    out(r, c0) = gate(rb, 0);
    out(r, c0 | mask) = gate(rb, 1);
  }
  return out;
}

EncodingLayer EncodingLayer::diagonal(std::vector<double> eigenvalues, std::size_t feature, double scale) {
  if (!is_power_of_two(eigenvalues.size())) {
    throw std::invalid_argument("EncodingLayer: eigenvalue vector length must be a power of two");
  }
  EncodingLayer layer;
  layer.eigenvalues = std::move(eigenvalues);
  layer.feature_index = feature;
  layer.scale = scale;
  return layer;
}

std::vector<cplx> EncodingLayer::phases(double u) const {
  std::vector<cplx> out(eigenvalues.size());
  for (std::size_t k = 0; k < eigenvalues.size(); ++k) out[k] = std::polar(1.0, -eigenvalues[k] * scale * u);
  return out;
}

EncodingLayer rz_layer(std::size_t qubits, std::span<const std::pair<std::size_t, double>> qubit_scales,
                       std::size_t feature) {
  if (qubits == 0) throw std::invalid_argument("rz_layer: need at least one qubit");
  const std::size_t dim = std::size_t{1} << qubits;
  EncodingLayer layer;
  layer.eigenvalues.assign(dim, 0.0);
  layer.feature_index = feature;
  layer.scale = 1.0;
  for (const auto& [q, s] : qubit_scales) {
    if (q >= qubits) throw std::invalid_argument("rz_layer: qubit out of range");
    layer.gates.push_back(RotationGate{Axis::Z, q, feature, s});
    // RZ(s u): basis bit 0 picks up exp(-i s u / 2), bit 1 picks up exp(+i s u / 2).
    for (std::size_t k = 0; k < dim; ++k) layer.eigenvalues[k] += (qubit_bit(k, q, qubits) == 0 ? 0.5 : -0.5) * s;
  }
  return layer;
}

EncodingLayer exponential_layer(std::size_t n_qubits, std::size_t feature) {
  return exponential_layer(n_qubits, 0, n_qubits, feature);
}

EncodingLayer exponential_layer(std::size_t register_qubits, std::size_t first_qubit, std::size_t n_qubits,
                                std::size_t feature, double input_scale) {
  if (n_qubits == 0) throw std::invalid_argument("exponential_layer: N must be at least 1");
  if (first_qubit + n_qubits > register_qubits) throw std::invalid_argument("exponential_layer: qubits exceed register");
  std::vector<std::pair<std::size_t, double>> qs;
  for (std::size_t k = 0; k < n_qubits; ++k)
    qs.emplace_back(first_qubit + k, input_scale * std::ldexp(1.0, static_cast<int>(k)));
  return rz_layer(register_qubits, qs, feature);
}

std::size_t EncodingSpec::feature_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n = std::max(n, l.feature_index + 1);
  return n;
}

DensityMatrix EncodingSpec::rho0() const { return initial_state ? *initial_state : DensityMatrix::ground(qubits); }

void EncodingSpec::validate() const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].dim() != dim()) {
      std::ostringstream os;
      os << "EncodingSpec: layer " << l << " has dimension " << layers[l].dim() << ", register needs " << dim();
      throw std::invalid_argument(os.str());
    }
  }
  for (std::size_t k = 0; k < variational_slots.size(); ++k) {
    if (variational_slots[k] > layers.size()) throw std::invalid_argument("EncodingSpec: variational slot beyond last gap");
    if (k > 0 && variational_slots[k] <= variational_slots[k - 1])
      throw std::invalid_argument("EncodingSpec: variational slots must be strictly increasing");
  }
  if (initial_state && initial_state->dim() != dim()) throw std::invalid_argument("EncodingSpec: initial state dimension");
}

std::vector<cplx> uniform_superposition(std::size_t qubits) {
  const std::size_t dim = std::size_t{1} << qubits;
  return std::vector<cplx>(dim, cplx{1.0 / std::sqrt(static_cast<double>(dim)), 0.0});
}

DensityMatrix parallel_state(const EncodingLayer& layer, double x, std::span<const cplx> gamma) {
  if (gamma.size() != layer.dim()) throw std::invalid_argument("parallel_state: gamma length mismatch");
  double norm2 = 0.0;
  for (const auto& g : gamma) norm2 += std::norm(g);
  if (std::abs(norm2 - 1.0) > 1e-10) throw std::invalid_argument("parallel_state: gamma is not normalized");
  const auto ph = layer.phases(x);
  std::vector<cplx> psi(gamma.size());
  for (std::size_t k = 0; k < psi.size(); ++k) psi[k] = ph[k] * gamma[k];
  return DensityMatrix::trusted(ComplexMatrix::outer(psi));
}

DensityMatrix parallel_state(const EncodingLayer& layer, double x) {
  const auto gamma = uniform_superposition(layer.qubits());
  return parallel_state(layer, x, gamma);
}

std::vector<double> layer_inputs(const EncodingSpec& spec, std::span<const double> x) {
  std::vector<double> u(spec.layers.size());
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const std::size_t f = spec.layers[l].feature_index;
    if (f >= x.size()) {
      std::ostringstream os;
      os << "layer " << l << " encodes feature " << f << " but input has " << x.size() << " features";
      throw std::invalid_argument(os.str());
    }
    u[l] = x[f];
  }
  return u;
}

void check_variational(const EncodingSpec& spec, std::span<const ComplexMatrix> variational, double tol) {
  if (variational.size() != spec.variational_slots.size())
    throw std::invalid_argument("sequential_state: one unitary required per variational slot");
  for (std::size_t k = 0; k < variational.size(); ++k) {
    if (variational[k].rows() != spec.dim() || !is_unitary(variational[k], tol)) {
      std::ostringstream os;
      os << "sequential_state: variational block " << k << " is not a " << spec.dim() << "-dim unitary";
      throw NumericError(os.str());
    }
  }
}

DensityMatrix sequential_state_layerwise(const EncodingSpec& spec, std::span<const double> inputs,
                                         std::span<const ComplexMatrix> variational, const LayerHook& after_layer) {
  if (inputs.size() != spec.layers.size()) throw std::invalid_argument("sequential_state: one input per layer required");
  if (variational.size() != spec.variational_slots.size())
    throw std::invalid_argument("sequential_state: one unitary required per variational slot");
  ComplexMatrix rho = spec.rho0().matrix();
  const std::size_t dim = rho.rows();
  std::size_t next_slot = 0;
  auto apply_slots_at = [&](std::size_t gap) {
    while (next_slot < spec.variational_slots.size() && spec.variational_slots[next_slot] == gap) {
      rho = conjugate(variational[next_slot], rho);
      ++next_slot;
    }
  };
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    apply_slots_at(l);
    const auto ph = spec.layers[l].phases(inputs[l]);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) rho(i, j) *= ph[i] * std::conj(ph[j]);
    if (after_layer) after_layer(l, rho);
  }
  apply_slots_at(spec.layers.size());
  return DensityMatrix::trusted(std::move(rho));
}

DensityMatrix sequential_state(const EncodingSpec& spec, std::span<const double> x,
                               std::span<const ComplexMatrix> variational) {
  spec.validate();
  check_variational(spec, variational);
  const auto u = layer_inputs(spec, x);
  return sequential_state_layerwise(spec, u, variational);
}

}  // namespace qsmooth
