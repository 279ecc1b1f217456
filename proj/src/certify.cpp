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

#include "qsmooth/certify.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "qsmooth/parallel.hpp"

namespace qsmooth {

namespace {

void require_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("bound: sigma must be > 0");
}

}  // namespace

TraceBoundResult gaussian_parallel_bound(double sigma, double x, double y) {
  return gaussian_sequential_bound(sigma, 1, x, y);
}

TraceBoundResult gaussian_sequential_bound(double sigma, std::size_t layers, double x, double y) {
  require_sigma(sigma);
  if (layers == 0) throw std::invalid_argument("bound: layer count must be >= 1");
  const double t = std::sqrt(static_cast<double>(layers)) * std::abs(x - y) / (2.0 * sigma);
  // 2 Phi(t) - 1 = erf(t / sqrt 2), accurate near zero
  return {std::erf(t / std::sqrt(2.0)), BoundMethod::ClosedForm, 0.0, 0};
}

TraceBoundResult generic_bound_1d(const SmoothingDistribution& dist, double x, double y) {
  if (!dist.has_density()) throw std::invalid_argument("generic_bound_1d: distribution " + dist.label() + " has no density");
  if (x == y) return {0.0, BoundMethod::Quadrature, 0.0, 0};
  auto f = [&](double z) { return std::max(dist.density(z - x) - dist.density(z - y), 0.0); };
  std::vector<double> breaks{0.5 * (x + y)};
  if (dist.kind() == SmoothingDistribution::Kind::UniformInterval) {
    const double h = 0.5 * dist.parameter();
    for (double c : {x, y}) {
      breaks.push_back(c - h);
      breaks.push_back(c + h);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double inf = std::numeric_limits<double>::infinity();
  double total = 0.0, err = 0.0;
  for (std::size_t k = 0; k <= breaks.size(); ++k) {
    const double a = k == 0 ? -inf : breaks[k - 1];
    const double b = k == breaks.size() ? inf : breaks[k];
    double e = 0.0;
    total += GK::integrate(f, a, b, 15, 1e-12, &e);
    err += std::abs(e) * (std::isfinite(a) && std::isfinite(b) ? (b - a) : 1.0);
  }
  return {std::clamp(total, 0.0, 1.0), BoundMethod::Quadrature, err, 0};
}

TraceBoundResult generic_bound_Ld(const SmoothingDistribution& dist, std::size_t layers, double x, double y,
                                  std::size_t samples, std::uint64_t seed) {
  if (!dist.has_density()) throw std::invalid_argument("generic_bound_Ld: distribution " + dist.label() + " has no density");
  if (layers == 0 || samples < 2) throw std::invalid_argument("generic_bound_Ld: need layers >= 1 and samples >= 2");
  if (x == y) return {0.0, BoundMethod::MonteCarlo, 0.0, samples};
  std::mt19937_64 rng(seed);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    // ratio Q(z) / P(z) for z ~ P, accumulated in log space
    double log_ratio = 0.0;
    bool outside = false;
    for (std::size_t l = 0; l < layers; ++l) {
      const double z = x + dist.sample(rng);
      const double p = dist.density(z - x), q = dist.density(z - y);
      if (q <= 0.0) {
        outside = true;
        break;
      }
      log_ratio += std::log(q) - std::log(p);
    }
    const double v = outside ? 1.0 : std::max(0.0, 1.0 - std::exp(log_ratio));
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double se = std::sqrt(std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0)) / n);
  return {mean, BoundMethod::MonteCarlo, se, samples};
}

// ---------------------------------------------------------------------------
// Radii

double radius_from_probability(double sigma, double weight, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream os;
    os << "radius: probability bound " << p << " must lie strictly inside (0, 1)";
    throw std::invalid_argument(os.str());
  }
  if (!(sigma >= 0.0) || !(weight > 0.0)) throw std::invalid_argument("radius: need sigma >= 0 and weight > 0");
  if (p <= 0.5) return 0.0;
  return sigma / std::sqrt(weight) * stats::normal_quantile(p);
}

double radius_exponential(double sigma, std::size_t layers, double p) {
  if (layers == 0) throw std::invalid_argument("radius: layer count must be >= 1");
  return radius_from_probability(sigma, static_cast<double>(layers), p);
}

std::string to_string(UniformRadiusFormula f) { return f == UniformRadiusFormula::Reduced ? "reduced" : "conservative"; }

UniformRadiusFormula uniform_formula_from_string(const std::string& name) {
  if (name == "reduced") return UniformRadiusFormula::Reduced;
  if (name == "conservative") return UniformRadiusFormula::Conservative;
  throw std::invalid_argument("unknown uniform radius formula '" + name + "' (expected reduced or conservative)");
}

double radius_uniform(double sigma, std::size_t layers, std::size_t qubits_per_layer, double p,
                      UniformRadiusFormula formula) {
  if (layers == 0 || qubits_per_layer == 0) throw std::invalid_argument("radius: layers and qubits must be >= 1");
  const double L = static_cast<double>(layers);
  const double four_n = std::ldexp(1.0, 2 * static_cast<int>(qubits_per_layer));
  const double weight = formula == UniformRadiusFormula::Reduced ? four_n / 4.0 * L / 3.0 : L * (four_n - 1.0) / 3.0;
  return radius_from_probability(sigma, weight, p);
}

double clopper_pearson_lower(std::size_t successes, std::size_t trials, double confidence) {
  if (trials == 0 || successes > trials) throw std::invalid_argument("clopper_pearson_lower: need 0 <= k <= n, n >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("clopper_pearson_lower: confidence in (0, 1)");
  if (successes == 0) return 0.0;
  const double alpha = 1.0 - confidence;
  return boost::math::ibeta_inv(static_cast<double>(successes), static_cast<double>(trials - successes + 1), alpha);
}

// ---------------------------------------------------------------------------
// Certificates

std::string to_string(CertifyMode m) { return m == CertifyMode::Exact ? "exact" : "shots"; }
std::string to_string(SmoothingStrategy s) { return s == SmoothingStrategy::Exponential ? "exponential" : "uniform"; }

namespace {

double certificate_radius(const Classifier& model, double p_lower, const CertifyOptions& opts) {
  if (!(p_lower > 0.5)) return 0.0;
  const auto& sm = *model.smoothing();
  const double sigma = sm.distribution.parameter();
  if (sm.strategy == SmoothingStrategy::Uniform && opts.uniform_formula == UniformRadiusFormula::Reduced) {
    const auto& enc = model.encoding();
    std::size_t n = 0;
    std::vector<std::size_t> per_feature(enc.feature_count(), 0);
    for (const auto& l : enc.layers) {
      n = std::max(n, l.gates.size());
      ++per_feature[l.feature_index];
    }
    const std::size_t layers = *std::max_element(per_feature.begin(), per_feature.end());
    return radius_uniform(sigma, layers, n, std::min(p_lower, 1.0 - 1e-16), UniformRadiusFormula::Reduced);
  }
  return radius_from_probability(sigma, model.noise_weight(), std::min(p_lower, 1.0 - 1e-16));
}

}  // namespace

Certificate certify_point(const Classifier& model, std::span<const double> x, int label, std::size_t point_id,
                          const CertifyOptions& opts) {
  if (!model.smoothing()) throw std::invalid_argument("certify: classifier has no smoothing configured");
  if (model.smoothing()->distribution.kind() != SmoothingDistribution::Kind::Gaussian)
    throw std::invalid_argument("certify: radii are defined for Gaussian smoothing only");
  Certificate c;
  c.point_id = point_id;
  c.label = label;
  c.strategy = model.smoothing()->strategy;
  c.mode = opts.mode;
  const double y = model.forward(x);
  if (opts.mode == CertifyMode::Exact) {
    c.probability = y;
    c.prediction = predict_from_probability(y);
    c.p_lower = c.prediction == 1 ? y : 1.0 - y;
    c.confidence = 1.0;
  } else {
    if (opts.shots == 0) throw std::invalid_argument("certify: shots mode needs at least one shot");
    std::mt19937_64 rng(derive_seed(opts.seed, point_id));
    std::binomial_distribution<std::size_t> bin(opts.shots, std::clamp(y, 0.0, 1.0));
    const std::size_t ones = bin(rng);
    c.shots = opts.shots;
    c.probability = static_cast<double>(ones) / static_cast<double>(opts.shots);
    c.prediction = 2 * ones > opts.shots ? 1 : 0;
    const std::size_t top = c.prediction == 1 ? ones : opts.shots - ones;
    c.p_lower = clopper_pearson_lower(top, opts.shots, opts.confidence);
    c.confidence = opts.confidence;
  }
  c.radius = certificate_radius(model, c.p_lower, opts);
  if (const auto& fe = model.frontend()) {
    c.frontend_norm = fe->spectral_norm();
    c.radius = *c.frontend_norm > 0.0 ? c.radius / *c.frontend_norm : std::numeric_limits<double>::infinity();
  }
  return c;
}

std::vector<Certificate> certify_dataset(const Classifier& model, const Dataset& data, const CertifyOptions& opts,
                                         std::size_t threads) {
  data.validate();
  std::vector<Certificate> out(data.size());
  parallel_for(data.size(), threads,
               [&](std::size_t i) { out[i] = certify_point(model, data.points[i], data.labels[i], i, opts); });
  return out;
}

std::vector<CurvePoint> certified_curve(std::span<const Certificate> certs, std::span<const double> radii) {
  if (certs.empty()) throw std::invalid_argument("certified_curve: no certificates");
  std::vector<CurvePoint> curve;
  const double n = static_cast<double>(certs.size());
  for (double r : radii) {
    std::size_t certified = 0, correct = 0;
    for (const auto& c : certs) {
      if (!(c.radius > 0.0 && c.radius >= r)) continue;
      ++certified;
      if (c.prediction == c.label) ++correct;
    }
    curve.push_back({r, static_cast<double>(certified) / n, static_cast<double>(correct) / n});
  }
  return curve;
}

double curve_area(std::span<const CurvePoint> curve) {
  double a = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k)
    a += 0.5 * (curve[k].certified_accuracy + curve[k - 1].certified_accuracy) * (curve[k].radius - curve[k - 1].radius);
  return a;
}

}  // namespace qsmooth
