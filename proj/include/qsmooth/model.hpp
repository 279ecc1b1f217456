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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsmooth/data.hpp"
#include "qsmooth/encoding.hpp"
#include "qsmooth/smoothing.hpp"

namespace qsmooth {

// ---------------------------------------------------------------------------
// Ansatz

enum class AnsatzKind {
  /// Per repetition: RY and RZ on every qubit, then CX(q, q+1) down the chain.
  TwoLocal,
  /// Per repetition: RY on every qubit, then the CX chain.
  RealAmplitudes,
};

std::string to_string(AnsatzKind kind);
AnsatzKind ansatz_kind_from_string(const std::string& name);

/// A block placed at variational slot `slot` (index into EncodingSpec::variational_slots).
/// Several blocks on one slot are applied in list order.
struct AnsatzBlock {
  std::size_t slot = 0;
  AnsatzKind kind = AnsatzKind::TwoLocal;
  std::size_t reps = 1;
};

struct AnsatzGate {
  bool is_cx = false;
  Axis axis = Axis::Y;
  std::size_t qubit = 0;   // rotation qubit or CX control
  std::size_t target = 0;  // CX target
  std::size_t param = 0;   // rotation parameter index
};

/// Parameterized unitaries for every variational slot of an encoding.
class VariationalCircuit {
 public:
  VariationalCircuit() = default;
  VariationalCircuit(std::size_t qubits, std::size_t slot_count, std::vector<AnsatzBlock> blocks);

  std::size_t qubits() const { return qubits_; }
  std::size_t slot_count() const { return gates_.size(); }
  std::size_t parameter_count() const { return param_slot_.size(); }
  const std::vector<AnsatzBlock>& blocks() const { return blocks_; }
  const std::vector<AnsatzGate>& gates(std::size_t slot) const { return gates_.at(slot); }
  std::size_t slot_of_parameter(std::size_t p) const { return param_slot_.at(p); }

  ComplexMatrix slot_unitary(std::size_t slot, std::span<const double> theta) const;
  std::vector<ComplexMatrix> unitaries(std::span<const double> theta) const;

 private:
  std::size_t qubits_ = 0;
  std::vector<AnsatzBlock> blocks_;
  std::vector<std::vector<AnsatzGate>> gates_;
  std::vector<std::size_t> param_slot_;
};

/// CX with control and target on a `qubits`-wide register.
ComplexMatrix cx_unitary(std::size_t control, std::size_t target, std::size_t qubits);

// ---------------------------------------------------------------------------
// Measurement and loss

/// Diagonal projector onto odd-popcount basis states.
ComplexMatrix parity_povm(std::size_t qubits);
/// Projector onto |1> of qubit `qubit`.
ComplexMatrix qubit_povm(std::size_t qubit, std::size_t qubits);
/// Throws std::invalid_argument unless 0 <= povm <= I within tol.
void check_povm(const ComplexMatrix& povm, double tol = 1e-10);

/// eta(y) = 1{y > 1/2}
inline int predict_from_probability(double y) { return y > 0.5 ? 1 : 0; }

/// Binary cross entropy with p clamped into [1e-9, 1 - 1e-9].
double bce_loss(double p, int label);
/// d bce / d p at the clamped p.
double bce_loss_derivative(double p, int label);

// ---------------------------------------------------------------------------
// Classical front-end

struct LinearFrontEnd {
  std::size_t in_dim = 0, out_dim = 0;
  std::vector<double> weight;  // out_dim x in_dim, row-major
  std::vector<double> bias;

  static LinearFrontEnd identity(std::size_t n);
  /// Entries N(0, scale^2 / in_dim), zero bias.
  static LinearFrontEnd random(std::size_t in_dim, std::size_t out_dim, double scale, std::uint64_t seed);

  void validate() const;
  std::vector<double> forward(std::span<const double> x) const;
  double spectral_norm() const;
};

// ---------------------------------------------------------------------------
// Classifier

struct ClassifierSmoothing {
  SmoothingDistribution distribution = SmoothingDistribution::gaussian(0.0);
  SmoothingStrategy strategy = SmoothingStrategy::Exponential;
};

enum class GradientMode { ParameterShift, FiniteDifference };

/// y(x) = Tr(Pi E(rho(x))) with an optional linear front-end and optional smoothing.
class Classifier {
 public:
  Classifier() = default;
  Classifier(EncodingSpec encoding, VariationalCircuit ansatz, ComplexMatrix povm);

  const EncodingSpec& encoding() const { return encoding_; }
  const VariationalCircuit& ansatz() const { return ansatz_; }
  const ComplexMatrix& povm() const { return povm_; }

  const std::vector<double>& parameters() const { return theta_; }
  void set_parameters(std::vector<double> theta);
  /// theta_k ~ U[-scale, scale]
  void randomize_parameters(std::uint64_t seed, double scale = M_PI);

  const std::optional<ClassifierSmoothing>& smoothing() const { return smoothing_; }
  const std::optional<SmoothingPlan>& plan() const { return plan_; }
  void set_smoothing(std::optional<ClassifierSmoothing> smoothing);

  const std::optional<LinearFrontEnd>& frontend() const { return frontend_; }
  void set_frontend(std::optional<LinearFrontEnd> fe);

  /// Raw input dimension (front-end input when present).
  std::size_t input_dim() const;
  /// Quantum features: front-end output, or x itself.
  std::vector<double> features(std::span<const double> x) const;

  /// Probability from raw input; smoothed whenever smoothing is configured.
  double forward(std::span<const double> x) const;
  double forward_unsmoothed(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return predict_from_probability(forward(x)); }

  /// Probability from quantum features.
  double forward_features(std::span<const double> z, bool smoothed) const;
  DensityMatrix state(std::span<const double> z, bool smoothed) const;

  /// d y / d theta at quantum features z.
  std::vector<double> parameter_gradient(std::span<const double> z, bool smoothed, GradientMode mode,
                                         double h = 1e-4) const;
  /// d y / d z: shift rule on single-gate layers, central differences otherwise.
  std::vector<double> feature_gradient(std::span<const double> z, bool smoothed, double h = 1e-4) const;

  /// Effective layer count for radii: max over features of the plan's noise weight.
  double noise_weight() const;

 private:
  double evaluate(const EncodingSpec& spec, std::span<const double> inputs, std::span<const ComplexMatrix> w,
                  const std::vector<QuantumChannel>* channels) const;
  const EncodingSpec& active_spec(bool smoothed) const;

  EncodingSpec encoding_;
  VariationalCircuit ansatz_;
  ComplexMatrix povm_;
  std::vector<double> theta_;
  std::vector<ComplexMatrix> unitaries_;
  std::optional<ClassifierSmoothing> smoothing_;
  std::optional<SmoothingPlan> plan_;
  std::optional<LinearFrontEnd> frontend_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 0.1;
  /// Learning rate for front-end weights; negative means learning_rate.
  double frontend_learning_rate = -1.0;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  GradientMode mode = GradientMode::ParameterShift;
  double fd_step = 1e-4;
  /// Train through the smoothed model instead of the base model.
  bool smoothed = false;
  std::size_t threads = 1;
};

struct TrainResult {
  /// Mean BCE over the training set, evaluated after each epoch.
  std::vector<double> loss;
};

/// Mini-batch gradient descent on the mean BCE. Deterministic under cfg.seed.
TrainResult train(Classifier& model, const Dataset& data, const TrainConfig& cfg);

double accuracy(const Classifier& model, const Dataset& data, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Kernels

/// Encoded state with identity variational blocks, smoothed by `plan` when given.
DensityMatrix kernel_state(const EncodingSpec& spec, const SmoothingPlan* plan, std::span<const double> x);
/// Re Tr(a b)
double state_overlap(const DensityMatrix& a, const DensityMatrix& b);
double kernel(const EncodingSpec& spec, const SmoothingPlan* plan, std::span<const double> x,
              std::span<const double> y);

struct KernelRidgeModel {
  std::vector<double> alpha;
};

/// alpha = (K + (ridge + jitter) I)^{-1} y for a row-major n x n Gram matrix.
KernelRidgeModel kernel_ridge_fit(std::span<const double> gram, std::size_t n, std::span<const int> labels,
                                  double ridge, double jitter = 1e-8);
/// sum_i alpha_i k_i, clamped into [0, 1].
double kernel_ridge_score(const KernelRidgeModel& model, std::span<const double> kvec);

}  // namespace qsmooth
