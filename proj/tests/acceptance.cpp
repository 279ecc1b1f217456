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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include "qsmooth/experiment.hpp"
#include "qsmooth/parallel.hpp"
#include "test_support.hpp"

using namespace qsmooth;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok) { pass = pass && ok; }
};

int failures = 0;

void criterion(int id, const char* name, const std::function<void(Outcome&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " exception: " << e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] %2d %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", id, name, s, o.detail.str().c_str());
  std::fflush(stdout);
  failures += !o.pass;
}

RunConfig source_config(const std::string& name) {
  return load_run_config((std::filesystem::path(QSMOOTH_SOURCE_DIR) / "configs" / name).string());
}

SmoothingDistribution random_distribution(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 2.0);
  if (rng() % 2 == 0) return SmoothingDistribution::gaussian(u(rng));
  return SmoothingDistribution::uniform_interval(2.0 * u(rng));
}

// `layers` exponential layers on feature 0, a fixed unitary slot before each,
// starting from the uniform superposition
EncodingSpec chain_spec(std::size_t qubits, std::size_t layers) {
  EncodingSpec spec;
  spec.qubits = qubits;
  for (std::size_t l = 0; l < layers; ++l) {
    spec.layers.push_back(exponential_layer(qubits, 0));
    spec.variational_slots.push_back(l);
  }
  spec.initial_state = DensityMatrix::pure(uniform_superposition(qubits));
  return spec;
}

struct SharedRuns {
  std::optional<RunConfig> tm_cfg;
  std::optional<DataSplit> tm_data;
  std::optional<TrainOutcome> tm;
};

}  // namespace

int main() {
  SharedRuns shared;

  // 1 and 2 share the random (distribution, eigenvalue) pairs
  double defect = 0.0, action = 0.0, min_eig = 0.0;
  {
    std::mt19937_64 rng(101);
    for (int k = 0; k < 100; ++k) {
      const std::size_t dim = std::size_t{1} << (1 + k % 5);
      std::uniform_real_distribution<double> ue(-6.0, 6.0);
      std::vector<double> eig(dim);
      for (auto& e : eig) e = ue(rng);
      const auto a = build_A(random_distribution(rng), eig);
      min_eig = std::min(min_eig, a.min_eigenvalue());
      const auto ch = kraus_from_A(a);
      defect = std::max(defect, ch.completeness_defect());
      const auto rho = testing::random_density(dim, rng);
      action = std::max(action, max_abs_diff(apply_channel(ch, rho).matrix(), hadamard(rho.matrix(), a.as_complex())));
    }
  }
  criterion(1, "Kraus completeness and Hadamard action", [&](Outcome& o) {
    o.require(defect <= 1e-10 && action <= 1e-10);
    o.detail << "100 pairs, dims 2..32: max completeness defect " << defect << ", max action error " << action;
  });
  criterion(2, "smoothing matrix is PSD", [&](Outcome& o) {
    o.require(min_eig >= -1e-10);
    o.detail << "min eigenvalue over 100 pairs " << min_eig;
  });

  criterion(3, "channel equals sampled average", [&](Outcome& o) {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    for (std::size_t layers : {1, 2})
      for (std::size_t qubits : {1, 2}) {
        const auto spec = chain_spec(qubits, layers);
        std::vector<ComplexMatrix> w;
        for (std::size_t l = 0; l < layers; ++l) w.push_back(testing::random_unitary(std::size_t{1} << qubits, rng));
        const auto dist = random_distribution(rng);
        const std::vector<double> x{0.7};
        const auto exact = smooth_sequential_state(spec, x, w, dist);
        const auto mc = mc_smoothed_state(spec, x, w, dist, {200000, rng(), 1, {}});
        const auto e = exact.matrix().data();
        const auto m = mc.mean.matrix().data();
        for (std::size_t k = 0; k < e.size(); ++k) {
          const double tol = std::max(1e-2, 3.0 * mc.std_error[k]);
          worst = std::max(worst, std::abs(e[k] - m[k]) / tol);
          o.require(std::abs(e[k] - m[k]) <= tol);
        }
      }
    o.detail << "1-2 layers x 1-2 qubits at 2e5 samples: worst |diff| / tolerance " << worst;
  });

  criterion(4, "phase damping closed form", [&](Outcome& o) {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> ux(-M_PI, M_PI), us(0.01, 2.5);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const double x = ux(rng), sigma = us(rng);
      const auto rho = testing::random_density(4, rng);
      const auto u = tensor_product(rotation_unitary(Axis::Z, x), ComplexMatrix::identity(2));
      const ComplexMatrix rotated = conjugate(u, rho.matrix());
      const auto damped = apply_channel(phase_damping(1.0 - std::exp(-sigma * sigma), 0, 2), DensityMatrix::trusted(rotated));
      // E[RZ(x + d) rho RZ(x + d)^H] for d ~ N(0, sigma^2): coherences between
      // different first-qubit values pick up E[e^{+-i d}] = e^{-sigma^2 / 2}
      ComplexMatrix expected = rotated;
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
          if ((i >> 1) != (j >> 1)) expected(i, j) *= std::exp(-sigma * sigma / 2.0);
      worst = std::max(worst, max_abs_diff(damped.matrix(), expected));
    }
    o.require(worst <= 1e-12);
    o.detail << "50 triples, max entry error " << worst;
  });

  criterion(5, "one-dimensional bound", [&](Outcome& o) {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> ux(-3.0, 3.0), us(0.05, 2.0);
    double quad = 0.0, excess = -1.0;
    for (int k = 0; k < 100; ++k) {
      const double x = ux(rng), y = ux(rng), sigma = us(rng);
      const double q = generic_bound_1d(SmoothingDistribution::gaussian(sigma), x, y).value;
      quad = std::max(quad, std::abs(q - (2.0 * stats::normal_cdf(std::abs(x - y) / (2.0 * sigma)) - 1.0)));
    }
    for (int k = 0; k < 100; ++k) {
      const std::size_t qubits = 1 + k % 3;
      const auto spec = chain_spec(qubits, 1);
      const std::vector<ComplexMatrix> w{testing::random_unitary(std::size_t{1} << qubits, rng)};
      const auto dist = random_distribution(rng);
      const double x = ux(rng), y = ux(rng);
      const double td = trace_distance(smooth_sequential_state(spec, std::vector<double>{x}, w, dist),
                                       smooth_sequential_state(spec, std::vector<double>{y}, w, dist));
      excess = std::max(excess, td - generic_bound_1d(dist, x, y).value);
    }
    o.require(quad <= 1e-6 && excess <= 1e-9);
    o.detail << "quadrature vs closed form max error " << quad << " over 100 triples; max(trace distance - bound) "
             << excess << " over 100 encodings";
  });

  criterion(6, "L-dimensional bound", [&](Outcome& o) {
    std::mt19937_64 rng(606);
    double worst = 0.0;
    for (std::size_t L : {2, 3, 4}) {
      const double sigma = 0.6, x = 0.1, y = 0.55;
      const auto mc = generic_bound_Ld(SmoothingDistribution::gaussian(sigma), L, x, y, 1000000, rng());
      const double closed = 2.0 * stats::normal_cdf(std::sqrt(static_cast<double>(L)) * std::abs(x - y) / (2.0 * sigma)) - 1.0;
      const double z = std::abs(mc.value - closed) / mc.error;
      worst = std::max(worst, z);
      o.require(z <= 3.0);
    }
    o.detail << "L = 2, 3, 4 at 1e6 samples: worst deviation " << worst << " standard errors";
  });

  criterion(7, "certificates survive PGD on TwoMoons", [&](Outcome& o) {
    shared.tm_cfg = source_config("two_moons.json");
    shared.tm_data = load_data(*shared.tm_cfg);
    shared.tm = run_training(*shared.tm_cfg, *shared.tm_data, 1);
    const auto& m = shared.tm->model;
    const auto& test = shared.tm_data->test;
    const auto certs = certify_dataset(m, test, CertifyOptions{}, 1);
    std::size_t attacked = 0, flips = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (certs[i].radius <= 0.0) continue;
      AttackConfig a;
      a.epsilon = 0.95 * certs[i].radius;
      a.steps = 100;
      a.restarts = 3;
      a.seed = derive_seed(77, i);
      ++attacked;
      flips += pgd_attack(m, test.points[i], certs[i].prediction, a).success;
    }
    o.require(shared.tm->test_accuracy >= 0.95 && flips == 0 && attacked > 0);
    o.detail << "test accuracy " << shared.tm->test_accuracy << " (smoothed, sigma "
             << m.smoothing()->distribution.parameter() << "); " << flips << " flips over " << attacked
             << " certified test points";
  });

  criterion(8, "Clopper-Pearson coverage", [&](Outcome& o) {
    std::mt19937_64 rng(808);
    for (double p : {0.6, 0.9}) {
      std::binomial_distribution<std::size_t> b(500, p);
      int covered = 0;
      for (int k = 0; k < 1000; ++k) covered += p > clopper_pearson_lower(b(rng), 500, 0.95);
      o.require(covered >= 940);
      o.detail << "p = " << p << ": " << covered << "/1000 covered; ";
    }
  });

  criterion(9, "monotone curves and attack upper bound", [&](Outcome& o) {
    if (!shared.tm) throw std::runtime_error("needs the TwoMoons run from criterion 7");
    const auto& cfg = *shared.tm_cfg;
    const auto& test = shared.tm_data->test;
    std::size_t checked = 0;
    auto monotone = [&](const std::vector<CurvePoint>& c) {
      ++checked;
      for (std::size_t i = 1; i < c.size(); ++i)
        o.require(c[i].certified_accuracy <= c[i - 1].certified_accuracy &&
                  c[i].certified_ratio <= c[i - 1].certified_ratio);
    };
    for (const auto& oc : run_certification(shared.tm->model, test, cfg, 1)) monotone(oc.curve);
    RunConfig shots = cfg;
    shots.certify.mode = CertifyMode::Shots;
    for (const auto& oc : run_certification(shared.tm->model, test, shots, 1)) monotone(oc.curve);
    const auto attack = run_attack(shared.tm->model, test, cfg, 1);
    if (!attack.certified) throw std::runtime_error("attack run produced no certified curve");
    monotone(*attack.certified);
    double min_gap = 1.0;
    for (std::size_t i = 0; i < attack.curve.points.size(); ++i) {
      const double gap = attack.curve.points[i].accuracy - (*attack.certified)[i].certified_accuracy;
      min_gap = std::min(min_gap, gap);
      o.require(gap >= 0.0);
    }
    o.detail << checked << " curves (exact and shots, 5 sigmas, attack grid) non-increasing; min attack - certified gap "
             << min_gap;
  });

  criterion(10, "uniform smoothing stays closer to the unsmoothed model", [&](Outcome& o) {
    KernelBlock k;
    k.qubits = 4;
    k.sigma = 1.5;
    const auto rows = kernel_grid(k);
    const double le = kernel_l2_deviation(rows, SmoothingStrategy::Exponential);
    const double lu = kernel_l2_deviation(rows, SmoothingStrategy::Uniform);
    o.require(lu < le);
    o.detail << "kernel L2 deviation uniform " << lu << " vs exponential " << le << "; ";
    if (!shared.tm) throw std::runtime_error("needs the TwoMoons run from criterion 7");
    const auto& radii = shared.tm_cfg->certify.radii;
    for (double sigma : {0.5, 0.75}) {
      double area[2];
      for (int s = 0; s < 2; ++s) {
        Classifier m = shared.tm->model;
        m.set_smoothing(ClassifierSmoothing{SmoothingDistribution::gaussian(sigma),
                                            s == 0 ? SmoothingStrategy::Exponential : SmoothingStrategy::Uniform});
        const auto certs = certify_dataset(m, shared.tm_data->test, CertifyOptions{}, 1);
        area[s] = curve_area(certified_curve(certs, radii));
      }
      o.require(area[1] >= area[0]);
      o.detail << "sigma " << sigma << " area uniform " << area[1] << " vs exponential " << area[0] << "; ";
    }
  });

  criterion(11, "MNIST-lite hybrid certificates", [&](Outcome& o) {
    const auto cfg = source_config("mnist.json");
    const auto data = load_data(cfg);
    const auto r = run_training(cfg, data, 1);
    Classifier m = r.model;
    m.set_smoothing(ClassifierSmoothing{SmoothingDistribution::gaussian(0.25), SmoothingStrategy::Exponential});
    const auto certs = certify_dataset(m, data.test, CertifyOptions{}, 1);
    std::size_t correct = 0, nonzero = 0;
    for (const auto& c : certs) {
      if (c.prediction != c.label) continue;
      ++correct;
      nonzero += c.radius > 0.0;
    }
    o.require(data.train.size() == 200 && data.test.size() == 200);
    o.require(r.clean_test_accuracy >= 0.95 && correct > 0 && 2 * nonzero >= correct);
    o.detail << data.train.size() << "/" << data.test.size() << " digits; base test accuracy "
             << r.clean_test_accuracy << ", smoothed " << r.test_accuracy << "; nonzero radius for " << nonzero << "/"
             << correct << " correct points at sigma 0.25 (front-end norm "
             << m.frontend()->spectral_norm() << ")";
  });

  criterion(12, "spectral norm vs SVD", [&](Outcome& o) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto fe = LinearFrontEnd::random(784, 6, 1.0, 1200 + s);
      ComplexMatrix w(6, 784);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 784; ++j) w(i, j) = fe.weight[i * 784 + j];
      const double oracle = testing::singular_values(w).front();
      worst = std::max(worst, std::abs(fe.spectral_norm() - oracle) / oracle);
    }
    o.require(worst <= 1e-6);
    o.detail << "20 random 6x784 matrices, max relative error " << worst;
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
