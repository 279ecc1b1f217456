#include <cmath>
#include <random>

#include "doctest.h"
#include "qsmooth/model.hpp"
#include "test_support.hpp"

using namespace qsmooth;
using qsmooth::testing::singular_values;

namespace {

Classifier small_model(std::size_t qubits, std::uint64_t seed, const ComplexMatrix& povm) {
  EncodingSpec spec;
  spec.qubits = qubits;
  spec.layers = {exponential_layer(qubits, 0), exponential_layer(qubits, 1)};
  spec.variational_slots = {0, 1, 2};
  Classifier m(spec,
               VariationalCircuit(qubits, 3,
                                  {{0, AnsatzKind::TwoLocal, 1}, {1, AnsatzKind::TwoLocal, 1}, {2, AnsatzKind::RealAmplitudes, 1}}),
               povm);
  m.randomize_parameters(seed);
  return m;
}

Classifier one_feature_model() {
  EncodingSpec spec;
  spec.qubits = 1;
  spec.layers = {exponential_layer(1, 0)};
  spec.variational_slots = {0, 1};
  return Classifier(spec, VariationalCircuit(1, 2, {{0, AnsatzKind::TwoLocal, 1}, {1, AnsatzKind::TwoLocal, 1}}),
                    qubit_povm(0, 1));
}

}  // namespace

TEST_CASE("ansatz structure") {
  const VariationalCircuit c(3, 2, {{0, AnsatzKind::TwoLocal, 2}, {1, AnsatzKind::RealAmplitudes, 1}, {1, AnsatzKind::TwoLocal, 1}});
  CHECK(c.parameter_count() == 12 + 3 + 6);
  CHECK(c.slot_of_parameter(0) == 0);
  CHECK(c.slot_of_parameter(20) == 1);
  std::mt19937_64 rng(1);
  std::vector<double> theta(c.parameter_count());
  for (auto& t : theta) t = std::uniform_real_distribution<double>(-3, 3)(rng);
  for (const auto& u : c.unitaries(theta)) CHECK(is_unitary(u, 1e-12));
  CHECK_THROWS_AS(VariationalCircuit(2, 1, {{1, AnsatzKind::TwoLocal, 1}}), std::invalid_argument);
  CHECK(ansatz_kind_from_string(to_string(AnsatzKind::RealAmplitudes)) == AnsatzKind::RealAmplitudes);
  CHECK_THROWS_AS(ansatz_kind_from_string("ring"), std::invalid_argument);

  // zero angles: only the CX chain remains
  const VariationalCircuit ra(2, 1, {{0, AnsatzKind::RealAmplitudes, 1}});
  const std::vector<double> zero(2, 0.0);
  const ComplexMatrix cx(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0});
  CHECK(max_abs_diff(ra.slot_unitary(0, zero), cx) <= 1e-14);
  CHECK(cx_unitary(0, 1, 2) == cx);
}

TEST_CASE("parity and qubit POVMs") {
  CHECK(parity_povm(1) == ComplexMatrix::diagonal(std::vector<double>{0, 1}));
  CHECK(parity_povm(2) == ComplexMatrix::diagonal(std::vector<double>{0, 1, 1, 0}));
  for (std::size_t d = 1; d <= 5; ++d) CHECK(parity_povm(d).trace().real() == std::ldexp(1.0, static_cast<int>(d) - 1));
  CHECK(qubit_povm(0, 2) == ComplexMatrix::diagonal(std::vector<double>{0, 0, 1, 1}));
  CHECK_NOTHROW(check_povm(parity_povm(3)));
  CHECK_THROWS_AS(check_povm(ComplexMatrix::identity(2) * cplx{2.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(check_povm(ComplexMatrix::identity(2) * cplx{-0.5, 0.0}), std::invalid_argument);
}

TEST_CASE("forward: trivial POVMs and the parity of |000>") {
  const auto id = small_model(2, 1, ComplexMatrix::identity(4));
  const auto zero = small_model(2, 1, ComplexMatrix(4, 4));
  const std::vector<double> x{0.3, -0.7};
  CHECK(id.forward(x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(zero.forward(x) == 0.0);

  EncodingSpec empty;
  empty.qubits = 3;
  const Classifier parity(empty, VariationalCircuit(3, 0, {}), parity_povm(3));
  CHECK(parity.forward(std::vector<double>{}) == 0.0);
}

TEST_CASE("forward stays in [0, 1] and predict thresholds strictly") {
  const auto m = small_model(2, 3, parity_povm(2));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 100; ++k) {
    const std::vector<double> x{u(rng), u(rng)};
    const double y = m.forward(x);
    CHECK(y >= 0.0);
    CHECK(y <= 1.0);
  }
  CHECK(predict_from_probability(0.6) == 1);
  CHECK(predict_from_probability(0.5) == 0);
  CHECK(predict_from_probability(0.4) == 0);
}

TEST_CASE("bce loss") {
  CHECK(bce_loss(1.0, 1) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(bce_loss(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isfinite(bce_loss(0.0, 1)));
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const double p = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    const int y = k % 2;
    CHECK(std::abs(bce_loss(p, y) - (-y * std::log(p) - (1 - y) * std::log(1 - p))) <= 1e-14);
  }
}

TEST_CASE("parameter-shift gradients agree with finite differences") {
  const auto m = small_model(2, 6, parity_povm(2));
  const std::vector<double> z{0.4, -1.3};
  const auto ps = m.parameter_gradient(z, false, GradientMode::ParameterShift);
  const auto fd = m.parameter_gradient(z, false, GradientMode::FiniteDifference, 1e-4);
  REQUIRE(ps.size() == m.parameters().size());
  for (std::size_t p = 0; p < ps.size(); ++p) CHECK(std::abs(ps[p] - fd[p]) <= 1e-5);

  auto smoothed = m;
  smoothed.set_smoothing(ClassifierSmoothing{SmoothingDistribution::gaussian(0.3), SmoothingStrategy::Exponential});
  const auto sps = smoothed.parameter_gradient(z, true, GradientMode::ParameterShift);
  const auto sfd = smoothed.parameter_gradient(z, true, GradientMode::FiniteDifference, 1e-4);
  for (std::size_t p = 0; p < sps.size(); ++p) CHECK(std::abs(sps[p] - sfd[p]) <= 1e-5);

  const auto constant = small_model(2, 6, ComplexMatrix::identity(4));
  for (double g : constant.parameter_gradient(z, false, GradientMode::ParameterShift)) CHECK(std::abs(g) <= 1e-12);
}

TEST_CASE("feature gradients agree with finite differences") {
  EncodingSpec spec;
  spec.qubits = 2;
  const std::pair<std::size_t, double> q0[] = {{0, 1.0}}, q1[] = {{1, 1.5}};
  spec.layers = {rz_layer(2, q0, 0), rz_layer(2, q1, 1), exponential_layer(2, 0)};
  spec.variational_slots = {0, 2, 3};
  Classifier m(spec,
               VariationalCircuit(2, 3, {{0, AnsatzKind::TwoLocal, 1}, {1, AnsatzKind::TwoLocal, 1}, {2, AnsatzKind::TwoLocal, 1}}),
               parity_povm(2));
  m.randomize_parameters(7);
  const std::vector<double> z{0.2, 0.9};
  for (bool smoothed : {false, true}) {
    if (smoothed) m.set_smoothing(ClassifierSmoothing{SmoothingDistribution::gaussian(0.4), SmoothingStrategy::Exponential});
    const auto g = m.feature_gradient(z, smoothed);
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<double> p = z, q = z;
      p[k] += 1e-5;
      q[k] -= 1e-5;
      const double fd = (m.forward_features(p, smoothed) - m.forward_features(q, smoothed)) / 2e-5;
      CHECK(std::abs(g[k] - fd) <= 1e-6);
    }
  }
}

TEST_CASE("smoothed forward equals the expected unsmoothed forward") {
  auto m = small_model(2, 8, qubit_povm(1, 2));
  const double sigma = 0.35;
  m.set_smoothing(ClassifierSmoothing{SmoothingDistribution::gaussian(sigma), SmoothingStrategy::Exponential});
  const std::vector<double> x{0.5, -0.2};
  const double exact = m.forward(x);
  // noise is independent per layer; sample layer inputs directly
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, sigma);
  const auto w = m.ansatz().unitaries(m.parameters());
  const int n = 40000;
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < n; ++k) {
    const std::vector<double> u{x[0] + nd(rng), x[1] + nd(rng)};
    const auto rho = sequential_state_layerwise(m.encoding(), u, w);
    const double y = (m.povm() * rho.matrix()).trace().real();
    sum += y;
    sumsq += y * y;
  }
  const double mean = sum / n, se = std::sqrt((sumsq / n - mean * mean) / n);
  CHECK(std::abs(exact - mean) <= 4.0 * se);
}

TEST_CASE("training: separable toy problem, determinism and zero epochs") {
  Dataset ds;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.2, 1.2);
  for (int k = 0; k < 40; ++k) {
    const int label = k % 2;
    ds.points.push_back({label ? u(rng) : -u(rng)});
    ds.labels.push_back(label);
  }
  auto m = one_feature_model();
  m.randomize_parameters(11);
  auto copy = m;
  TrainConfig cfg;
  cfg.epochs = 0;
  train(copy, ds, cfg);
  CHECK(copy.parameters() == m.parameters());

  cfg.epochs = 200;
  cfg.learning_rate = 0.5;
  cfg.batch_size = 8;
  cfg.seed = 12;
  auto a = m, b = m;
  const auto ra = train(a, ds, cfg);
  const auto rb = train(b, ds, cfg);
  CHECK(ra.loss.size() == 200);
  for (double l : ra.loss) CHECK(std::isfinite(l));
  CHECK(ra.loss == rb.loss);
  CHECK(a.parameters() == b.parameters());
  CHECK(accuracy(a, ds) >= 0.95);

  Dataset empty;
  CHECK_THROWS_AS(train(a, empty, cfg), std::invalid_argument);
  Dataset bad = ds;
  bad.labels[0] = 2;
  CHECK_THROWS_AS(train(a, bad, cfg), std::invalid_argument);
}

TEST_CASE("hybrid training updates the front-end") {
  Dataset ds;
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 0.1);
  for (int k = 0; k < 30; ++k) {
    const int label = k % 2;
    ds.points.push_back({label ? 1.0 + n(rng) : n(rng), n(rng), n(rng)});
    ds.labels.push_back(label);
  }
  auto m = one_feature_model();
  m.randomize_parameters(14);
  m.set_frontend(LinearFrontEnd::random(3, 1, 1.0, 15));
  const auto before = m.frontend()->weight;
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 0.5;
  cfg.batch_size = 5;
  train(m, ds, cfg);
  CHECK(m.frontend()->weight != before);
  CHECK(accuracy(m, ds) >= 0.95);
}

TEST_CASE("front-end") {
  const auto id = LinearFrontEnd::identity(4);
  const std::vector<double> x{1, -2, 3, 0.5};
  CHECK(id.forward(x) == x);
  CHECK(id.spectral_norm() == doctest::Approx(1.0).epsilon(1e-10));
  auto two = id;
  for (auto& w : two.weight) w *= 2.0;
  CHECK(two.spectral_norm() == doctest::Approx(2.0).epsilon(1e-10));
  const auto r = LinearFrontEnd::random(50, 6, 1.0, 16);
  ComplexMatrix m(6, 50);
  for (std::size_t k = 0; k < r.weight.size(); ++k) m.data()[k] = r.weight[k];
  CHECK(std::abs(r.spectral_norm() - singular_values(m).front()) / r.spectral_norm() <= 1e-6);
  CHECK_THROWS_AS(id.forward(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("kernels") {
  EncodingSpec spec;
  spec.qubits = 1;
  spec.layers = {exponential_layer(1, 0)};
  spec.initial_state = DensityMatrix::pure(uniform_superposition(1));
  const std::vector<double> a{0.3}, b{1.4};
  CHECK(kernel(spec, nullptr, a, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(kernel(spec, nullptr, a, b) - std::pow(std::cos((0.3 - 1.4) / 2.0), 2)) <= 1e-14);
  CHECK(kernel(spec, nullptr, a, b) == kernel(spec, nullptr, b, a));

  EncodingSpec two;
  two.qubits = 4;
  two.layers = {exponential_layer(4, 0, 2, 0, 1.0), exponential_layer(4, 2, 2, 1, 1.0)};
  two.initial_state = DensityMatrix::pure(uniform_superposition(4));
  const auto plan = make_smoothing_plan(two, SmoothingDistribution::gaussian(0.5), SmoothingStrategy::Exponential);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::size_t n = 12;
  std::vector<DensityMatrix> states;
  for (std::size_t i = 0; i < n; ++i) states.push_back(kernel_state(two, &plan, std::vector<double>{u(rng), u(rng)}));
  ComplexMatrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(state_overlap(states[i], states[i]) <= 1.0 + 1e-12);
    for (std::size_t j = 0; j < n; ++j) gram(i, j) = state_overlap(states[i], states[j]);
  }
  CHECK(eig_hermitian(gram).values.back() >= -1e-8);
}

TEST_CASE("kernel ridge regression") {
  const std::vector<double> eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
  const std::vector<int> y{1, 0, 1};
  const auto fit = kernel_ridge_fit(eye, 3, y, 0.5, 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(fit.alpha[i] == doctest::Approx(y[i] / 1.5).epsilon(1e-14));

  const std::vector<double> g2{1.0, 0.1, 0.1, 1.0};
  const std::vector<int> y2{0, 1};
  const auto m2 = kernel_ridge_fit(g2, 2, y2, 1e-3);
  CHECK(predict_from_probability(kernel_ridge_score(m2, std::vector<double>{1.0, 0.1})) == 0);
  CHECK(predict_from_probability(kernel_ridge_score(m2, std::vector<double>{0.1, 1.0})) == 1);
  const std::vector<double> asym{1.0, 0.2, 0.1, 1.0};
  CHECK_THROWS_AS(kernel_ridge_fit(asym, 2, y2, 0.0), std::invalid_argument);
  const std::vector<double> singular{1.0, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(kernel_ridge_fit(singular, 2, y2, 0.0, 0.0), NumericError);
}
