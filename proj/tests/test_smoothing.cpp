#include <cmath>
#include <random>

#include "doctest.h"
#include "qsmooth/smoothing.hpp"
#include "test_support.hpp"

using namespace qsmooth;
using qsmooth::testing::random_density;
using qsmooth::testing::random_state_vector;
using qsmooth::testing::random_unitary;

namespace {

SmoothingDistribution laplace(double b) {
  return SmoothingDistribution::custom(
      "laplace", [b](double t) { return 1.0 / (1.0 + b * b * t * t); },
      [b](std::mt19937_64& rng) {
        const double e = std::exponential_distribution<double>(1.0 / b)(rng);
        return std::uniform_int_distribution<int>(0, 1)(rng) ? e : -e;
      },
      [b](double z) { return std::exp(-std::abs(z) / b) / (2.0 * b); });
}

SmoothingDistribution random_distribution(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 2.0);
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0:
      return SmoothingDistribution::gaussian(u(rng));
    case 1:
      return SmoothingDistribution::uniform_interval(2.0 * u(rng));
    default:
      return laplace(u(rng));
  }
}

std::vector<double> random_eigenvalues(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

ComplexMatrix pointwise(const ComplexMatrix& rho, const SmoothingMatrix& a) {
  ComplexMatrix out = rho;
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t j = 0; j < a.n; ++j) out(i, j) *= a(i, j);
  return out;
}

ComplexMatrix kraus_sum(const std::vector<ComplexMatrix>& kraus, const ComplexMatrix& rho) {
  ComplexMatrix out(rho.rows(), rho.cols());
  for (const auto& e : kraus) out += e * rho * e.adjoint();
  return out;
}

}  // namespace

TEST_CASE("distributions: characteristic functions and samplers") {
  const auto g = SmoothingDistribution::gaussian(0.7);
  CHECK(g.characteristic(0.0) == 1.0);
  CHECK(g.characteristic(1.3) == doctest::Approx(std::exp(-0.5 * 0.49 * 1.69)).epsilon(1e-15));
  CHECK(g.characteristic(-2.0) == g.characteristic(2.0));
  std::mt19937_64 rng(1);
  double mean = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) mean += g.sample(rng) / n;
  CHECK(std::abs(mean) <= 4.0 * 0.7 / std::sqrt(static_cast<double>(n)));

  const auto zero = SmoothingDistribution::gaussian(0.0);
  CHECK_FALSE(zero.has_density());
  CHECK_THROWS_AS(zero.density(0.0), std::logic_error);
  CHECK(zero.sample(rng) == 0.0);

  const auto u = SmoothingDistribution::uniform_interval(2.0);
  CHECK(u.characteristic(0.0) == 1.0);
  CHECK(u.characteristic(1.0) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
  CHECK(u.density(0.99) == 0.5);
  CHECK(u.density(1.01) == 0.0);
  for (double t = -10; t <= 10; t += 0.37) CHECK(std::abs(u.characteristic(t)) <= 1.0);
}

TEST_CASE("build_A: fixed examples") {
  const std::vector<double> half{-0.5, 0.5};
  const auto a = build_A(SmoothingDistribution::gaussian(1.0), half);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(0, 1) == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK(a(1, 0) == a(0, 1));

  const std::vector<double> four{-1.5, -0.5, 0.5, 1.5};
  const auto ones = build_A(SmoothingDistribution::gaussian(0.0), four);
  for (double v : ones.entries) CHECK(v == 1.0);

  const auto a4 = build_A(SmoothingDistribution::gaussian(0.5), four);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double d = four[j] - four[i];
      // Gaussian entries are exactly the RBF kernel
      CHECK(a4(i, j) == std::exp(-0.5 * 0.25 * d * d));
    }
  CHECK(a4.min_eigenvalue() >= -1e-10);

  const auto bad = SmoothingDistribution::custom("bad", [](double) { return 0.5; }, [](std::mt19937_64&) { return 0.0; });
  CHECK_THROWS_AS(build_A(bad, half), std::invalid_argument);
}

TEST_CASE("smoothing matrices are PSD for random laws and spectra") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto dist = random_distribution(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 32)(rng);
    const auto a = build_A(dist, random_eigenvalues(n, rng));
    CHECK(a.min_eigenvalue() >= -1e-10);
  }
}

TEST_CASE("kraus_from_A: completeness and pointwise action") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const auto dist = random_distribution(rng);
    const std::size_t n = std::size_t{1} << std::uniform_int_distribution<int>(0, 4)(rng);
    const auto a = build_A(dist, random_eigenvalues(n, rng));
    const auto ch = kraus_from_A(a);
    CHECK(ch.completeness_defect() <= 1e-10);
    CHECK(ch.is_diagonal());
    const auto rho = random_density(n, rng);
    CHECK(max_abs_diff(apply_channel(ch, rho).matrix(), pointwise(rho.matrix(), a)) <= 1e-10);
    CHECK(max_abs_diff(kraus_sum(ch.kraus(), rho.matrix()), pointwise(rho.matrix(), a)) <= 1e-10);
  }
}

TEST_CASE("kraus_from_A: limiting cases") {
  SmoothingMatrix ones{4, std::vector<double>(16, 1.0)};
  const auto id = kraus_from_A(ones);
  CHECK(id.kraus().size() == 1);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(std::abs(id.kraus()[0](i, i)) - 1.0) <= 1e-12);
  std::mt19937_64 rng(23);
  const auto rho = random_density(4, rng);
  CHECK(max_abs_diff(apply_channel(id, rho).matrix(), rho.matrix()) <= 1e-12);

  SmoothingMatrix eye{4, std::vector<double>(16, 0.0)};
  for (std::size_t i = 0; i < 4; ++i) eye.entries[i * 4 + i] = 1.0;
  const auto deph = kraus_from_A(eye);
  CHECK(deph.kraus().size() == 4);
  const auto out = apply_channel(deph, rho).matrix();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(out(i, j) - (i == j ? rho.matrix()(i, i) : cplx{})) <= 1e-12);

  SmoothingMatrix indefinite{2, {1, 2, 2, 1}};
  CHECK_THROWS_AS(kraus_from_A(indefinite), NumericError);
}

TEST_CASE("apply_channel: general Kraus sets match the direct sum") {
  std::mt19937_64 rng(24);
  const auto base = phase_damping(0.3, 1, 2);
  const ComplexMatrix v = random_unitary(4, rng);
  const auto ch = conjugated_channel(base, v);
  CHECK_FALSE(ch.is_diagonal());
  CHECK(ch.completeness_defect() <= 1e-10);
  const auto rho = random_density(4, rng);
  const auto out = apply_channel(ch, rho);
  CHECK(max_abs_diff(out.matrix(), kraus_sum(ch.kraus(), rho.matrix())) <= 1e-12);
  CHECK(std::abs(out.matrix().trace() - cplx{1.0, 0.0}) <= 1e-10);
  CHECK_THROWS_AS(apply_channel(ch, random_density(2, rng)), std::invalid_argument);
}

TEST_CASE("phase damping") {
  std::mt19937_64 rng(25);
  const auto rho = random_density(2, rng);
  CHECK(max_abs_diff(apply_channel(phase_damping(0.0), rho).matrix(), rho.matrix()) <= 1e-15);
  const auto out = apply_channel(phase_damping(0.36), rho).matrix();
  CHECK(std::abs(out(0, 1) - 0.8 * rho.matrix()(0, 1)) <= 1e-15);
  CHECK(out(0, 0) == rho.matrix()(0, 0));
  CHECK_THROWS_AS(phase_damping(1.5), std::invalid_argument);
  CHECK_THROWS_AS(phase_damping(-0.1), std::invalid_argument);

  CHECK(pd_param(SmoothingDistribution::gaussian(1.0), 1.0) == doctest::Approx(0.632121).epsilon(1e-6));
  CHECK(pd_param(SmoothingDistribution::gaussian(0.3), 0.0) == 0.0);
  for (int k = 0; k < 4; ++k) {
    const double s = 0.4, scale = std::ldexp(1.0, k);
    CHECK(std::abs(pd_param(SmoothingDistribution::gaussian(s), scale) - (1.0 - std::exp(-scale * scale * s * s))) <= 1e-15);
  }

  // 1 - phi(1)^2 gives the same channel as the smoothing matrix on (-1/2, 1/2)
  const std::vector<double> half{-0.5, 0.5};
  for (int trial = 0; trial < 20; ++trial) {
    const auto dist = random_distribution(rng);
    const auto pd = phase_damping(pd_param(dist, 1.0));
    const auto ka = kraus_from_A(build_A(dist, half));
    const auto r = random_density(2, rng);
    CHECK(max_abs_diff(apply_channel(pd, r).matrix(), apply_channel(ka, r).matrix()) <= 1e-12);
  }
}

TEST_CASE("phase damping after RZ equals the closed-form expectation") {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> ux(-4.0, 4.0), us(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = ux(rng), sigma = us(rng);
    const auto rho = random_density(4, rng);
    const ComplexMatrix rz = embed_single_qubit(rotation_unitary(Axis::Z, x), 0, 2);
    ComplexMatrix got = conjugate(rz, rho.matrix());
    phase_damping(1.0 - std::exp(-sigma * sigma), 0, 2).apply_in_place(got);
    // E[exp(-i delta)] = exp(-sigma^2 / 2) on entries where qubit 0 differs
    const double damp = std::exp(-0.5 * sigma * sigma);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        const int bi = static_cast<int>(qubit_bit(i, 0, 2)), bj = static_cast<int>(qubit_bit(j, 0, 2));
        const cplx expect = rho.matrix()(i, j) * (bi == bj ? cplx{1.0, 0.0} : std::polar(damp, (bi - bj) * x));
        CHECK(std::abs(got(i, j) - expect) <= 1e-12);
      }
  }
}

TEST_CASE("conjugation by H turns RZ smoothing into RX smoothing") {
  const double sigma = 0.6, x = 0.9;
  const double h = 1.0 / std::sqrt(2.0);
  const ComplexMatrix had(2, 2, {h, h, h, -h});
  const auto ch = conjugated_channel(phase_damping(pd_param(SmoothingDistribution::gaussian(sigma), 1.0)), had);
  CHECK(ch.completeness_defect() <= 1e-12);
  const auto rho0 = DensityMatrix::ground(1);
  ComplexMatrix exact = conjugate(rotation_unitary(Axis::X, x), rho0.matrix());
  ch.apply_in_place(exact);

  std::mt19937_64 rng(27);
  std::normal_distribution<double> nd(0.0, sigma);
  const int n = 200000;
  ComplexMatrix mc(2, 2);
  for (int k = 0; k < n; ++k) mc += conjugate(rotation_unitary(Axis::X, x + nd(rng)), rho0.matrix());
  mc *= cplx{1.0 / n, 0.0};
  CHECK(max_abs_diff(exact, mc) <= 5e-3);

  const auto back = conjugated_channel(ch, had.adjoint());
  const auto orig = phase_damping(pd_param(SmoothingDistribution::gaussian(sigma), 1.0));
  for (std::size_t k = 0; k < back.kraus().size(); ++k) CHECK(max_abs_diff(back.kraus()[k], orig.kraus()[k]) <= 1e-15);
  CHECK_THROWS_AS(conjugated_channel(ch, ComplexMatrix::identity(2) * cplx{2.0, 0.0}), NumericError);
}

TEST_CASE("smoothing channels are completely positive") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 20; ++trial) {
    const auto dist = random_distribution(rng);
    const std::size_t n = std::size_t{1} << std::uniform_int_distribution<int>(1, 3)(rng);
    const auto ch = kraus_from_A(build_A(dist, random_eigenvalues(n, rng)));
    std::vector<ComplexMatrix> ext;
    for (const auto& e : ch.kraus()) ext.push_back(tensor_product(ComplexMatrix::identity(n), e));
    const auto psi = random_state_vector(n * n, rng);
    const ComplexMatrix out = kraus_sum(ext, ComplexMatrix::outer(psi));
    CHECK(eig_hermitian(out).values.back() >= -1e-9);
  }
}

TEST_CASE("nonlinear phase-damping parameter") {
  CHECK(nonlinear_pd_param(0.0, 0.7, -1.2) == 0.0);
  CHECK(nonlinear_pd_param(1.0, 0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> ux(-1.5, 1.5), us(0.2, 1.2);
  for (int trial = 0; trial < 3; ++trial) {
    const double x1 = ux(rng), x2 = ux(rng), sigma = us(rng);
    const auto est = nonlinear_pd_param_mc(SmoothingDistribution::gaussian(sigma), x1, x2, 1000000, 100 + trial);
    CHECK(std::abs(est.value - nonlinear_pd_param(sigma, x1, x2)) <= 3.0 * est.std_error);
  }
}

TEST_CASE("smoothed sequential states: reductions") {
  EncodingSpec spec;
  spec.qubits = 2;
  spec.layers = {exponential_layer(2, 0)};
  spec.initial_state = DensityMatrix::pure(uniform_superposition(2));
  const std::vector<double> x{0.4};
  const auto dist = SmoothingDistribution::gaussian(0.3);
  const auto smoothed = smooth_sequential_state(spec, x, {}, dist);
  const auto a = build_A(dist, spec.layers[0].eigenvalues);
  CHECK(max_abs_diff(smoothed.matrix(), pointwise(parallel_state(spec.layers[0], 0.4).matrix(), a)) <= 1e-12);

  spec.layers.push_back(exponential_layer(2, 1));
  spec.variational_slots = {1};
  std::mt19937_64 rng(30);
  const std::vector<ComplexMatrix> w{random_unitary(4, rng)};
  const std::vector<double> x2{0.4, -0.8};
  const auto none = SmoothingDistribution::gaussian(0.0);
  CHECK(max_abs_diff(smooth_sequential_state(spec, x2, w, none).matrix(), sequential_state(spec, x2, w).matrix()) <= 1e-12);
  const auto mc = mc_smoothed_state(spec, x2, w, none, {7, 1, 1, {}});
  CHECK(max_abs_diff(mc.mean.matrix(), sequential_state(spec, x2, w).matrix()) <= 1e-12);
}

TEST_CASE("channel smoothing equals the sampling average") {
  std::mt19937_64 rng(31);
  struct Case {
    std::size_t qubits, layers;
  };
  for (const Case c : {Case{1, 1}, Case{1, 2}, Case{2, 1}, Case{2, 2}}) {
    EncodingSpec spec;
    spec.qubits = c.qubits;
    std::vector<ComplexMatrix> w;
    for (std::size_t l = 0; l < c.layers; ++l) {
      spec.layers.push_back(exponential_layer(c.qubits, l));
      spec.variational_slots.push_back(l);
      w.push_back(random_unitary(spec.dim(), rng));
    }
    const auto dist = random_distribution(rng);
    const std::vector<double> x{0.3, -1.1};
    const auto exact = smooth_sequential_state(spec, x, w, dist);
    const auto mc = mc_smoothed_state(spec, x, w, dist, {200000, 42, 1, {}});
    const auto& e = exact.matrix().data();
    const auto& m = mc.mean.matrix().data();
    for (std::size_t k = 0; k < e.size(); ++k) CHECK(std::abs(e[k] - m[k]) <= std::max(1e-2, 3.0 * mc.std_error[k]));
  }
}

TEST_CASE("mc_smoothed_state is reproducible and thread-count independent") {
  EncodingSpec spec;
  spec.qubits = 2;
  spec.layers = {exponential_layer(2, 0), exponential_layer(2, 0)};
  spec.variational_slots = {1};
  std::mt19937_64 rng(32);
  const std::vector<ComplexMatrix> w{random_unitary(4, rng)};
  const std::vector<double> x{0.5};
  const auto dist = SmoothingDistribution::gaussian(0.4);
  const auto a = mc_smoothed_state(spec, x, w, dist, {5000, 9, 1, {}});
  const auto b = mc_smoothed_state(spec, x, w, dist, {5000, 9, 1, {}});
  const auto c = mc_smoothed_state(spec, x, w, dist, {5000, 9, 3, {}});
  CHECK(a.mean.matrix() == b.mean.matrix());
  CHECK(a.mean.matrix() == c.mean.matrix());
  CHECK_THROWS_AS(mc_smoothed_state(spec, x, w, dist, {0, 9, 1, {}}), std::invalid_argument);
}

TEST_CASE("smoothing plans: strategies and noise weights") {
  EncodingSpec spec;
  spec.qubits = 3;
  spec.layers = {exponential_layer(3, 0), exponential_layer(3, 1), exponential_layer(3, 0)};
  spec.variational_slots = {0, 2, 3};
  const auto dist = SmoothingDistribution::gaussian(0.2);

  const auto expo = make_smoothing_plan(spec, dist, SmoothingStrategy::Exponential);
  CHECK(expo.channels.size() == 3);
  CHECK(expo.noise_weight(0) == 2.0);
  CHECK(expo.noise_weight(1) == 1.0);
  CHECK(expo.max_noise_weight() == 2.0);
  for (const auto& ch : expo.channels) CHECK(ch.completeness_defect() <= 1e-10);

  const auto uni = make_smoothing_plan(spec, dist, SmoothingStrategy::Uniform);
  CHECK(uni.spec.layer_count() == 9);
  CHECK(uni.slot_map == std::vector<std::size_t>{0, 6, 9});
  // per-feature weight L * (1 + 4 + 16)
  CHECK(uni.noise_weight(0) == doctest::Approx(2.0 * 21.0));
  CHECK(uni.max_noise_weight() == doctest::Approx(42.0));
  for (std::size_t l = 0; l < 9; ++l) {
    const auto& g = uni.spec.layers[l].gates.front();
    CHECK(uni.noise_multiplier[l] * g.scale == doctest::Approx(1.0));
    // every gate sees the same damping 1 - phi(1)^2
    const auto& k = uni.channels[l].kraus();
    CHECK(k.size() == 2);
  }

  std::mt19937_64 rng(33);
  std::vector<ComplexMatrix> w;
  for (int k = 0; k < 3; ++k) w.push_back(random_unitary(8, rng));
  const std::vector<double> x{0.2, -0.6};
  // splitting without smoothing leaves the state unchanged
  const auto split = split_into_gate_layers(spec);
  CHECK(max_abs_diff(sequential_state(split, x, w).matrix(), sequential_state(spec, x, w).matrix()) <= 1e-12);

  const auto exact = smooth_sequential_state(uni, x, w);
  const auto mc = mc_smoothed_state(uni.spec, x, w, dist, {40000, 5, 1, uni.noise_multiplier});
  const auto& e = exact.matrix().data();
  const auto& m = mc.mean.matrix().data();
  for (std::size_t k = 0; k < e.size(); ++k) CHECK(std::abs(e[k] - m[k]) <= std::max(1e-2, 4.0 * mc.std_error[k]));

  EncodingSpec generic;
  generic.qubits = 1;
  generic.layers = {EncodingLayer::diagonal({-0.5, 0.5}, 0)};
  CHECK_THROWS_AS(make_smoothing_plan(generic, dist, SmoothingStrategy::Uniform), std::invalid_argument);
  CHECK_NOTHROW(make_smoothing_plan(generic, dist, SmoothingStrategy::Exponential));
}
