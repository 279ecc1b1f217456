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

#include <optional>
#include <string>
#include <vector>

#include "qsmooth/config.hpp"

namespace qsmooth {

struct DataSplit {
  Dataset train, test;
};

/// Generates or loads the configured dataset. A relative MNIST path is tried
/// against the working directory first, then against the source tree.
DataSplit load_data(const RunConfig& cfg);

struct TrainOutcome {
  Classifier model;
  TrainResult result;
  double train_accuracy = 0.0, test_accuracy = 0.0;
  /// Accuracy of the base (unsmoothed) classifier on the test split.
  double clean_test_accuracy = 0.0;
};

TrainOutcome run_training(const RunConfig& cfg, const DataSplit& data, std::size_t threads);

CertifyOptions certify_options(const RunConfig& cfg);

struct CertifyOutcome {
  double sigma = 0.0;
  std::vector<Certificate> certificates;
  std::vector<CurvePoint> curve;
  double area = 0.0;
};

/// One outcome per sigma of the sweep (or the model's own sigma).
/// Throws std::invalid_argument with a hint when the model has no smoothing.
std::vector<CertifyOutcome> run_certification(const Classifier& model, const Dataset& data, const RunConfig& cfg,
                                              std::size_t threads);

struct AttackOutcome {
  AttackCurve curve;
  /// Certified accuracy on the epsilon grid, when the model carries Gaussian smoothing.
  std::optional<std::vector<CurvePoint>> certified;
};

AttackConfig attack_config(const RunConfig& cfg);
AttackOutcome run_attack(const Classifier& model, const Dataset& data, const RunConfig& cfg, std::size_t threads);

struct KernelRow {
  std::vector<double> point;
  double unsmoothed = 0.0, exponential = 0.0, uniform = 0.0;
};

/// Exponential encoding used for kernel studies: one exponential layer per
/// input dimension, each on its share of the register, from the uniform superposition.
EncodingSpec kernel_encoding(std::size_t qubits, std::size_t dims);

/// k(p, 0) over the grid for the unsmoothed, exponentially smoothed and
/// uniformly smoothed encodings. With `rescale`, each column is min-max
/// mapped onto [0, 1]; a constant column maps to 1.
std::vector<KernelRow> kernel_grid(const KernelBlock& k, bool rescale = true);

/// sqrt(sum over the grid of (column - unsmoothed)^2).
double kernel_l2_deviation(const std::vector<KernelRow>& rows, SmoothingStrategy strategy);

struct KernelRidgeReport {
  std::string kernel;
  double train_accuracy = 0.0, test_accuracy = 0.0;
};

/// Kernel ridge classifiers on the configured 2-D data with each of the three kernels.
std::vector<KernelRidgeReport> kernel_ridge_study(const KernelBlock& k, const DataSplit& data, std::size_t threads);

}  // namespace qsmooth
