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
#include "qsmooth/model.hpp"
#include "qsmooth/smoothing.hpp"

namespace qsmooth {

// ---------------------------------------------------------------------------
// Trace-distance bounds

enum class BoundMethod { ClosedForm, Quadrature, MonteCarlo };

struct TraceBoundResult {
  double value = 0.0;
  BoundMethod method = BoundMethod::ClosedForm;
  /// Quadrature error estimate, or Monte-Carlo standard error.
  double error = 0.0;
  std::size_t samples = 0;
};

/// 2 Phi(|x - y| / (2 sigma)) - 1
TraceBoundResult gaussian_parallel_bound(double sigma, double x, double y);
/// 2 Phi(sqrt(L) |x - y| / (2 sigma)) - 1
TraceBoundResult gaussian_sequential_bound(double sigma, std::size_t layers, double x, double y);
/// Integral of max(f(z - x) - f(z - y), 0) by adaptive Gauss-Kronrod quadrature.
TraceBoundResult generic_bound_1d(const SmoothingDistribution& dist, double x, double y);
/// The L-dimensional analogue, estimated by sampling z from the product law centred at x.
TraceBoundResult generic_bound_Ld(const SmoothingDistribution& dist, std::size_t layers, double x, double y,
                                  std::size_t samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Radii

/// sigma / sqrt(weight) * Phi^{-1}(p) for p > 1/2, else 0. `weight` is the
/// effective layer count (L for a single feature). Throws outside (0, 1).
double radius_from_probability(double sigma, double weight, double p);
double radius_exponential(double sigma, std::size_t layers, double p);

enum class UniformRadiusFormula {
  /// sigma / sqrt(4^{N-1} L / 3) Phi^{-1}(p)
  Reduced,
  /// sigma / sqrt(L (4^N - 1) / 3) Phi^{-1}(p)
  Conservative,
};
std::string to_string(UniformRadiusFormula f);
UniformRadiusFormula uniform_formula_from_string(const std::string& name);
double radius_uniform(double sigma, std::size_t layers, std::size_t qubits_per_layer, double p,
                      UniformRadiusFormula formula = UniformRadiusFormula::Conservative);

/// One-sided exact binomial lower bound: the alpha quantile of Beta(k, n - k + 1).
double clopper_pearson_lower(std::size_t successes, std::size_t trials, double confidence);

// ---------------------------------------------------------------------------
// Certificates

enum class CertifyMode { Exact, Shots };
std::string to_string(CertifyMode m);
std::string to_string(SmoothingStrategy s);

struct CertifyOptions {
  CertifyMode mode = CertifyMode::Exact;
  std::size_t shots = 10000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  UniformRadiusFormula uniform_formula = UniformRadiusFormula::Conservative;
};

struct Certificate {
  std::size_t point_id = 0;
  int label = 0;
  int prediction = 0;
  /// Smoothed probability of class 1 (exact), or the observed frequency (shots).
  double probability = 0.0;
  /// Lower bound on the probability of the predicted class.
  double p_lower = 0.0;
  double radius = 0.0;
  double confidence = 1.0;
  SmoothingStrategy strategy = SmoothingStrategy::Exponential;
  CertifyMode mode = CertifyMode::Exact;
  std::size_t shots = 0;
  std::optional<double> frontend_norm;
};

/// Certifies one point of a smoothed classifier. The radius is in raw input
/// space: divided by the front-end spectral norm when a front-end is attached.
Certificate certify_point(const Classifier& model, std::span<const double> x, int label, std::size_t point_id,
                          const CertifyOptions& opts);
std::vector<Certificate> certify_dataset(const Classifier& model, const Dataset& data, const CertifyOptions& opts,
                                         std::size_t threads = 1);

struct CurvePoint {
  double radius = 0.0;
  double certified_ratio = 0.0;
  double certified_accuracy = 0.0;
};

/// A point counts at r when its radius is positive and >= r (accuracy also needs a correct prediction).
std::vector<CurvePoint> certified_curve(std::span<const Certificate> certs, std::span<const double> radii);
/// Trapezoidal area under certified accuracy over the grid.
double curve_area(std::span<const CurvePoint> curve);

}  // namespace qsmooth
