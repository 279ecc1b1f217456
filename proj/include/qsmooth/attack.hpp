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
#include <span>
#include <vector>

#include "qsmooth/data.hpp"
#include "qsmooth/model.hpp"

namespace qsmooth {

struct AttackConfig {
  double epsilon = 0.0;
  std::size_t steps = 100;
  /// Non-positive means 2.5 * epsilon / steps.
  double step_size = -1.0;
  std::size_t restarts = 1;
  std::uint64_t seed = 0;
  /// Central-difference step for input gradients.
  double fd_step = 1e-4;

  void validate() const;
  double effective_step() const;
};

struct AttackResult {
  bool success = false;
  std::vector<double> adversarial;
  double norm = 0.0;
  /// BCE after every iterate, all restarts concatenated.
  std::vector<double> loss_trace;
  /// Whether the ground truth is unchanged at the returned point (only with a semantic check).
  std::optional<bool> semantic_valid;
};

/// Probability of class 1 at a raw input.
using ProbabilityFn = std::function<double(std::span<const double>)>;
/// Gradient of the probability at a raw input.
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;
/// Ground-truth label of a raw input.
using SemanticFn = std::function<int(std::span<const double>)>;

/// Central finite differences of f at x.
std::vector<double> finite_difference_gradient(const ProbabilityFn& f, std::span<const double> x, double h);

/// L2 PGD maximizing BCE(f(x), label) from x0. Success means the prediction
/// at some iterate differs from the prediction at x0; with `semantic`, the
/// ground truth at that iterate must also equal the ground truth at x0.
AttackResult pgd_attack(const ProbabilityFn& f, std::span<const double> x0, int label, const AttackConfig& cfg,
                        const GradientFn& grad = {}, const SemanticFn& semantic = {});

/// Attack on a classifier's (smoothed, if configured) output. Inputs behind a
/// front-end use the analytic linear Jacobian times the feature gradient.
AttackResult pgd_attack(const Classifier& model, std::span<const double> x0, int label, const AttackConfig& cfg,
                        const SemanticFn& semantic = {});

/// 1 - 1[0.3 < |x| <= 0.8]
int semantic_check_annular(std::span<const double> x);

struct AttackCurvePoint {
  double epsilon = 0.0;
  double accuracy = 0.0;
  std::size_t successes = 0;
};

struct AttackRecord {
  std::size_t point_id = 0;
  double epsilon = 0.0;
  bool success = false;
  double norm = 0.0;
  std::optional<bool> semantic_valid;
};

struct AttackCurve {
  std::vector<AttackCurvePoint> points;
  std::vector<AttackRecord> records;
};

/// Accuracy under attack per epsilon (ascending). A point counts as accurate
/// when its clean prediction is correct and no attack at this or any smaller
/// epsilon succeeded.
AttackCurve attack_curve(const Classifier& model, const Dataset& data, std::span<const double> epsilons,
                         const AttackConfig& cfg, const SemanticFn& semantic = {}, std::size_t threads = 1);

}  // namespace qsmooth
