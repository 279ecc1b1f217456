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

#include "qsmooth/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "json.hpp"
#include "qsmooth/certify.hpp"
#include "qsmooth/config.hpp"

namespace qsmooth {

namespace {

using Cdf = std::function<double(double)>;

struct Check {
  bool pass = true;
  std::ostringstream detail;
  double worst = 0.0;

  void expect_le(double value, double limit) {
    worst = std::max(worst, value - limit);
    if (!(value <= limit)) pass = false;
  }
};

DensityMatrix random_density(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix acc(dim, dim);
  const int terms = 3;
  for (int t = 0; t < terms; ++t) {
    std::vector<cplx> v(dim);
    double s = 0.0;
    for (auto& a : v) {
      a = {n(rng), n(rng)};
      s += std::norm(a);
    }
    for (auto& a : v) a /= std::sqrt(s);
    acc += ComplexMatrix::outer(v) * cplx{1.0 / terms, 0.0};
  }
  return DensityMatrix(acc);
}

std::vector<ComplexMatrix> random_unitaries(std::size_t qubits, std::size_t count, std::mt19937_64& rng) {
  std::vector<AnsatzBlock> blocks;
  for (std::size_t s = 0; s < count; ++s) blocks.push_back({s, AnsatzKind::TwoLocal, 2});
  const VariationalCircuit c(qubits, count, blocks);
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  std::vector<double> theta(c.parameter_count());
  for (auto& t : theta) t = u(rng);
  return c.unitaries(theta);
}

SmoothingDistribution random_distribution(std::mt19937_64& rng, bool gaussian_only = false) {
  std::uniform_real_distribution<double> u(0.1, 1.5);
  if (gaussian_only || rng() % 2 == 0) return SmoothingDistribution::gaussian(u(rng));
  return SmoothingDistribution::uniform_interval(2.0 * u(rng));
}

std::vector<double> random_eigenvalues(std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<double> e(dim);
  for (auto& v : e) v = u(rng);
  return e;
}

// spec with `layers` exponential layers of feature 0 and a variational block before each
EncodingSpec chain_spec(std::size_t qubits, std::size_t layers, bool superposition) {
  EncodingSpec spec;
  spec.qubits = qubits;
  for (std::size_t l = 0; l < layers; ++l) {
    spec.layers.push_back(exponential_layer(qubits, 0));
    spec.variational_slots.push_back(l);
  }
  if (superposition) spec.initial_state = DensityMatrix::pure(uniform_superposition(qubits));
  return spec;
}

void check_phi(Check& c, const Cdf& cdf) {
  for (double t = -3.0; t <= 3.0; t += 0.5) c.expect_le(std::abs(stats::normal_quantile(cdf(t)) - t), 1e-9);
  c.detail << "Phi^-1(Phi(t)) = t on [-3, 3]";
}

void check_thm1b_lemma1(Check& kraus, Check& psd, std::mt19937_64& rng) {
  for (int k = 0; k < 30; ++k) {
    const std::size_t dim = std::size_t{1} << (1 + k % 4);
    const auto dist = random_distribution(rng);
    const auto a = build_A(dist, random_eigenvalues(dim, rng));
    psd.expect_le(-a.min_eigenvalue(), 1e-10);
    const auto ch = kraus_from_A(a);
    kraus.expect_le(ch.completeness_defect(), 1e-10);
    const auto rho = random_density(dim, rng);
    kraus.expect_le(max_abs_diff(apply_channel(ch, rho).matrix(), hadamard(rho.matrix(), a.as_complex())), 1e-10);
  }
  kraus.detail << "30 random A up to dim 16: completeness and Hadamard action within 1e-10";
  psd.detail << "30 random A: min eigenvalue >= -1e-10";
}

void check_sampling(Check& c, std::size_t layers, std::mt19937_64& rng, std::size_t threads) {
  for (std::size_t qubits : {1, 2}) {
    const auto spec = chain_spec(qubits, layers, true);
    const auto w = random_unitaries(qubits, layers, rng);
    const auto dist = random_distribution(rng);
    const std::vector<double> x{0.4};
    const auto exact = smooth_sequential_state(spec, x, w, dist);
    const auto mc = mc_smoothed_state(spec, x, w, dist, {40000, rng(), threads, {}});
    const auto e = exact.matrix().data();
    const auto m = mc.mean.matrix().data();
    for (std::size_t k = 0; k < e.size(); ++k) c.expect_le(std::abs(e[k] - m[k]), std::max(2e-2, 4.0 * mc.std_error[k]));
  }
  c.detail << layers << "-layer channel vs 4e4-sample average on 1 and 2 qubits";
}

void check_thm2(Check& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    const auto spec = chain_spec(1 + k % 3, 1, true);
    const auto w = random_unitaries(spec.qubits, 1, rng);
    const auto dist = random_distribution(rng);
    const double x = u(rng), y = u(rng);
    const auto sx = smooth_sequential_state(spec, std::vector<double>{x}, w, dist);
    const auto sy = smooth_sequential_state(spec, std::vector<double>{y}, w, dist);
    c.expect_le(trace_distance(sx, sy), generic_bound_1d(dist, x, y).value + 1e-9);
  }
  c.detail << "20 smoothed parallel encodings within the quadrature bound";
}

void check_thm3b(Check& c, std::mt19937_64& rng, const Cdf& cdf) {
  for (std::size_t L : {2, 3}) {
    const double sigma = 0.7, d = 0.5;
    const auto mc = generic_bound_Ld(SmoothingDistribution::gaussian(sigma), L, 0.0, d, 100000, rng());
    const double closed = 2.0 * cdf(std::sqrt(static_cast<double>(L)) * d / (2.0 * sigma)) - 1.0;
    c.expect_le(std::abs(mc.value - closed), 4.0 * mc.error);
  }
  c.detail << "L-layer sampled integral vs 2 Phi(sqrt(L) d / 2 sigma) - 1 within 4 standard errors";
}

void check_thm4(Check& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(-3.0, 3.0), us(0.05, 2.0);
  for (int k = 0; k < 20; ++k) {
    const double x = ux(rng), sigma = us(rng);
    const auto rho = random_density(4, rng);
    const auto rz = embed_single_qubit(rotation_unitary(Axis::Z, x), 0, 2);
    const auto rotated = DensityMatrix::trusted(conjugate(rz, rho.matrix()));
    const auto channel = apply_channel(phase_damping(1.0 - std::exp(-sigma * sigma), 0, 2), rotated);
    ComplexMatrix closed = rotated.matrix();
    const double damp = std::exp(-sigma * sigma / 2.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        if (qubit_bit(i, 0, 2) != qubit_bit(j, 0, 2)) closed(i, j) *= damp;
    c.expect_le(max_abs_diff(channel.matrix(), closed), 1e-12);
  }
  c.detail << "phase damping after RZ(x) vs closed-form expectation, 20 triples within 1e-12";
}

Classifier chain_classifier(std::size_t layers, double sigma, std::mt19937_64& rng) {
  std::vector<AnsatzBlock> blocks;
  EncodingSpec spec = chain_spec(1, layers, false);
  spec.variational_slots.push_back(layers);
  for (std::size_t s = 0; s <= layers; ++s) blocks.push_back({s, AnsatzKind::TwoLocal, 1});
  Classifier m(spec, VariationalCircuit(1, layers + 1, blocks), qubit_povm(0, 1));
  m.randomize_parameters(rng());
  m.set_smoothing(ClassifierSmoothing{SmoothingDistribution::gaussian(sigma), SmoothingStrategy::Exponential});
  return m;
}

// prediction stays constant inside every certified radius
void check_radius(Check& c, std::size_t layers, std::mt19937_64& rng) {
  const auto m = chain_classifier(layers, 0.5, rng);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int certified = 0;
  for (int k = 0; k < 10; ++k) {
    const std::vector<double> x{u(rng)};
    const auto cert = certify_point(m, x, 0, k, CertifyOptions{});
    if (cert.radius <= 0.0) continue;
    ++certified;
    for (int j = 0; j < 21; ++j) {
      const double t = (j / 10.0 - 1.0) * 0.999 * cert.radius;
      c.expect_le(m.predict(std::vector<double>{x[0] + t}) != cert.prediction ? 1.0 : 0.0, 0.0);
    }
  }
  c.detail << "; prediction constant inside " << certified << " certified radii";
}

void check_cor1(Check& c, std::mt19937_64& rng, const Cdf& cdf) {
  std::uniform_real_distribution<double> u(-2.0, 2.0), us(0.1, 1.5);
  for (int k = 0; k < 20; ++k) {
    const double sigma = us(rng), x = u(rng), y = u(rng);
    const double q = generic_bound_1d(SmoothingDistribution::gaussian(sigma), x, y).value;
    c.expect_le(std::abs(q - (2.0 * cdf(std::abs(x - y) / (2.0 * sigma)) - 1.0)), 1e-6);
  }
  c.detail << "gaussian quadrature vs 2 Phi(|x - y| / 2 sigma) - 1 within 1e-6";
  check_radius(c, 1, rng);
}

void check_cor2(Check& c, std::mt19937_64& rng, const Cdf& cdf) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (std::size_t L : {2, 3, 4}) {
    const auto m = chain_classifier(L, 0.4, rng);
    for (int k = 0; k < 5; ++k) {
      const double x = u(rng), y = u(rng);
      const double bound = 2.0 * cdf(std::sqrt(static_cast<double>(L)) * std::abs(x - y) / 0.8) - 1.0;
      const double td = trace_distance(m.state(std::vector<double>{x}, true), m.state(std::vector<double>{y}, true));
      c.expect_le(td, bound + 1e-9);
    }
  }
  c.detail << "sequential smoothed states within 2 Phi(sqrt(L) d / 2 sigma) - 1";
  check_radius(c, 3, rng);
}

}  // namespace

std::vector<SelftestResult> run_selftest(const SelftestOptions& opts) {
  const Cdf cdf = opts.flip_phi_sign ? Cdf([](double x) { return stats::normal_cdf(-x); })
                                     : Cdf([](double x) { return stats::normal_cdf(x); });
  std::vector<SelftestResult> out;
  auto run = [&](const std::string& id, const std::function<void(Check&, std::mt19937_64&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    std::mt19937_64 rng(opts.seed + std::hash<std::string>{}(id));
    try {
      body(c, rng);
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail << " exception: " << e.what();
    }
    if (!c.pass) c.detail << " (worst excess " << c.worst << ")";
    out.push_back({id, c.pass, c.detail.str(), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };
  run("Phi", [&](Check& c, std::mt19937_64&) { check_phi(c, cdf); });
  run("Thm1a", [&](Check& c, std::mt19937_64& rng) { check_sampling(c, 1, rng, opts.threads); });
  Check psd;
  run("Thm1b", [&](Check& c, std::mt19937_64& rng) { check_thm1b_lemma1(c, psd, rng); });
  out.push_back({"Lemma1", psd.pass, psd.detail.str(), 0.0});
  run("Thm2", [&](Check& c, std::mt19937_64& rng) { check_thm2(c, rng); });
  run("Thm3a", [&](Check& c, std::mt19937_64& rng) { check_sampling(c, 2, rng, opts.threads); });
  run("Thm3b", [&](Check& c, std::mt19937_64& rng) { check_thm3b(c, rng, cdf); });
  run("Thm4", [&](Check& c, std::mt19937_64& rng) { check_thm4(c, rng); });
  run("Cor1", [&](Check& c, std::mt19937_64& rng) { check_cor1(c, rng, cdf); });
  run("Cor2", [&](Check& c, std::mt19937_64& rng) { check_cor2(c, rng, cdf); });
  return out;
}

std::string selftest_report_json(const std::vector<SelftestResult>& results) {
  nlohmann::json j;
  j["version"] = kToolVersion;
  bool all = true;
  j["results"] = nlohmann::json::array();
  for (const auto& r : results) {
    all = all && r.pass;
    j["results"].push_back({{"id", r.id}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
  }
  j["pass"] = all;
  return j.dump(2);
}

}  // namespace qsmooth
