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
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qsmooth/encoding.hpp"
#include "qsmooth/numerics.hpp"

namespace qsmooth {

/// Zero-mean symmetric noise law described by its (real, even) characteristic
/// function, an optional density and a sampler.
class SmoothingDistribution {
 public:
  enum class Kind { Gaussian, UniformInterval, Custom };

  using Characteristic = std::function<double(double)>;
  using Density = std::function<double(double)>;
  using Sampler = std::function<double(std::mt19937_64&)>;

  /// N(0, sigma^2); sigma = 0 is the point mass at zero (no smoothing).
  static SmoothingDistribution gaussian(double sigma);
  /// Uniform on [-width/2, width/2].
  static SmoothingDistribution uniform_interval(double width);
  static SmoothingDistribution custom(std::string label, Characteristic phi, Sampler sampler,
                                      std::optional<Density> density = std::nullopt);

  Kind kind() const { return kind_; }
  /// sigma for Gaussian, width for uniform, 0 for custom.
  double parameter() const { return parameter_; }
  const std::string& label() const { return label_; }

  double characteristic(double t) const { return phi_(t); }
  bool has_density() const { return density_.has_value(); }
  /// Throws std::logic_error when no density exists.
  double density(double z) const;
  double sample(std::mt19937_64& rng) const { return sampler_(rng); }

 private:
  Kind kind_ = Kind::Custom;
  double parameter_ = 0.0;
  std::string label_;
  Characteristic phi_;
  Sampler sampler_;
  std::optional<Density> density_;
};

/// A[i][j] = phi(lambda_j - lambda_i); real symmetric with unit diagonal.
struct SmoothingMatrix {
  std::size_t n = 0;
  std::vector<double> entries;  // row-major

  double operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
  ComplexMatrix as_complex() const;
  double min_eigenvalue() const;
};

/// CPTP map in Kraus form. When every Kraus operator is diagonal the map is a
/// Hadamard product with `mask()` and is applied that way.
class QuantumChannel {
 public:
  QuantumChannel() = default;
  QuantumChannel(std::vector<ComplexMatrix> kraus, std::string label);

  const std::vector<ComplexMatrix>& kraus() const { return kraus_; }
  const std::string& label() const { return label_; }
  std::size_t dim() const { return kraus_.empty() ? 0 : kraus_.front().rows(); }

  /// max |sum_k E_k^H E_k - I|
  double completeness_defect() const;
  bool is_diagonal() const { return mask_.has_value(); }
  const std::optional<ComplexMatrix>& mask() const { return mask_; }

  /// Applies the channel in place to a square matrix of matching dimension.
  void apply_in_place(ComplexMatrix& rho) const;

 private:
  std::vector<ComplexMatrix> kraus_;
  std::string label_;
  std::optional<ComplexMatrix> mask_;
};

SmoothingMatrix build_A(const SmoothingDistribution& dist, std::span<const double> eigenvalues);

/// E_k = sqrt(s_k) diag(u_k) from the spectral decomposition of A. Eigenpairs
/// with s_k <= 1e-12 * s_max are dropped; a negative eigenvalue below -1e-10
/// raises NumericError.
QuantumChannel kraus_from_A(const SmoothingMatrix& a, std::string label = "smoothing");

DensityMatrix apply_channel(const QuantumChannel& ch, const DensityMatrix& rho);

/// Kraus {diag(1, sqrt(1-l)), diag(0, sqrt(l))}.
QuantumChannel phase_damping(double lambda);
/// The same channel on `qubit` of a `qubits`-wide register.
QuantumChannel phase_damping(double lambda, std::size_t qubit, std::size_t qubits);

/// 1 - phi(scale)^2: phase-damping strength smoothing RZ(scale * x) with respect to x.
double pd_param(const SmoothingDistribution& dist, double scale);

/// Kraus operators V E_k V^H.
QuantumChannel conjugated_channel(const QuantumChannel& ch, const ComplexMatrix& v);

/// Data-dependent phase-damping strength for RZ(x1 x2) under i.i.d. Gaussian noise:
/// 1 - exp(-sigma^2 (x1^2 + x2^2)) / (1 + sigma^4).
double nonlinear_pd_param(double sigma, double x1, double x2);

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Same quantity for a general distribution, with E[exp(-i d1 d2)] estimated from samples.
MonteCarloEstimate nonlinear_pd_param_mc(const SmoothingDistribution& dist, double x1, double x2, std::size_t samples,
                                         std::uint64_t seed);

enum class SmoothingStrategy {
  /// Noise on the encoded feature itself, shared by all gates of a layer.
  Exponential,
  /// Independent noise on each gate angle scale_g * x.
  Uniform,
};

/// Channels realizing a smoothing strategy over an encoding. For the uniform
/// strategy the layers are split into one layer per gate. Layer l of `spec`
/// is smoothed with noise multiplier[l] * delta, delta ~ dist.
struct SmoothingPlan {
  EncodingSpec spec;
  std::vector<double> noise_multiplier;
  std::vector<QuantumChannel> channels;
  /// Maps a variational slot of the original spec to the slot in `spec`.
  std::vector<std::size_t> slot_map;

  /// sum over layers encoding `feature` of 1 / multiplier^2.
  double noise_weight(std::size_t feature) const;
  /// max over features of noise_weight; the effective layer count for radii.
  double max_noise_weight() const;
};

SmoothingPlan make_smoothing_plan(const EncodingSpec& spec, const SmoothingDistribution& dist,
                                  SmoothingStrategy strategy);

/// Rewrites every gate-built layer as one layer per gate; variational slots are remapped.
EncodingSpec split_into_gate_layers(const EncodingSpec& spec, std::vector<std::size_t>* slot_map = nullptr);

/// Exact smoothed state (channels after every layer).
DensityMatrix smooth_sequential_state(const SmoothingPlan& plan, std::span<const double> x,
                                      std::span<const ComplexMatrix> variational);
/// Exponential-strategy plan built on the fly.
DensityMatrix smooth_sequential_state(const EncodingSpec& spec, std::span<const double> x,
                                      std::span<const ComplexMatrix> variational, const SmoothingDistribution& dist);

struct MonteCarloState {
  DensityMatrix mean;
  /// Per-entry standard error of the mean, max over real and imaginary parts.
  std::vector<double> std_error;
};

struct MonteCarloOptions {
  std::size_t samples = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Per-layer noise multipliers; empty means 1 for every layer.
  std::vector<double> noise_multiplier;
};

/// Sample mean of sequential_state over i.i.d. per-layer noise. Samples are
/// drawn in fixed-size batches with per-batch seeds, so the result does not
/// depend on the thread count.
MonteCarloState mc_smoothed_state(const EncodingSpec& spec, std::span<const double> x,
                                  std::span<const ComplexMatrix> variational, const SmoothingDistribution& dist,
                                  const MonteCarloOptions& opts);

}  // namespace qsmooth
