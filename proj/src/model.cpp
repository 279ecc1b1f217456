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

#include "qsmooth/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "qsmooth/parallel.hpp"

namespace qsmooth {

// ---------------------------------------------------------------------------
// Ansatz

std::string to_string(AnsatzKind kind) { return kind == AnsatzKind::TwoLocal ? "two_local" : "real_amplitudes"; }

AnsatzKind ansatz_kind_from_string(const std::string& name) {
  if (name == "two_local") return AnsatzKind::TwoLocal;
  if (name == "real_amplitudes") return AnsatzKind::RealAmplitudes;
  throw std::invalid_argument("unknown ansatz kind '" + name + "' (expected two_local or real_amplitudes)");
}

VariationalCircuit::VariationalCircuit(std::size_t qubits, std::size_t slot_count, std::vector<AnsatzBlock> blocks)
    : qubits_(qubits), blocks_(std::move(blocks)), gates_(slot_count) {
  if (qubits == 0) throw std::invalid_argument("VariationalCircuit: need at least one qubit");
  for (const auto& b : blocks_) {
    if (b.slot >= slot_count) {
      std::ostringstream os;
      os << "ansatz block at slot " << b.slot << " but the encoding has " << slot_count << " variational slots";
      throw std::invalid_argument(os.str());
    }
    auto& g = gates_[b.slot];
    for (std::size_t r = 0; r < b.reps; ++r) {
      for (std::size_t q = 0; q < qubits; ++q) {
        g.push_back(AnsatzGate{false, Axis::Y, q, 0, param_slot_.size()});
        param_slot_.push_back(b.slot);
        if (b.kind == AnsatzKind::TwoLocal) {
          g.push_back(AnsatzGate{false, Axis::Z, q, 0, param_slot_.size()});
          param_slot_.push_back(b.slot);
        }
      }
      for (std::size_t q = 0; q + 1 < qubits; ++q) g.push_back(AnsatzGate{true, Axis::Z, q, q + 1, 0});
    }
  }
}

namespace {

// U <- G U for a single-qubit gate g on `qubit`.
void left_apply_single(ComplexMatrix& u, const ComplexMatrix& g, std::size_t qubit, std::size_t qubits) {
  const std::size_t dim = u.rows();
  const std::size_t mask = std::size_t{1} << (qubits - 1 - qubit);
  for (std::size_t r0 = 0; r0 < dim; ++r0) {
    if (r0 & mask) continue;
    const std::size_t r1 = r0 | mask;
    for (std::size_t c = 0; c < u.cols(); ++c) {
      const cplx a = u(r0, c), b = u(r1, c);
      u(r0, c) = g(0, 0) * a + g(0, 1) * b;
      u(r1, c) = g(1, 0) * a + g(1, 1) * b;
    }
  }
}

void left_apply_cx(ComplexMatrix& u, std::size_t control, std::size_t target, std::size_t qubits) {
  const std::size_t cm = std::size_t{1} << (qubits - 1 - control);
  const std::size_t tm = std::size_t{1} << (qubits - 1 - target);
  for (std::size_t r = 0; r < u.rows(); ++r) {
    if (!(r & cm) || (r & tm)) continue;
    for (std::size_t c = 0; c < u.cols(); ++c) std::swap(u(r, c), u(r | tm, c));
  }
}

}  // namespace

ComplexMatrix cx_unitary(std::size_t control, std::size_t target, std::size_t qubits) {
  if (control >= qubits || target >= qubits || control == target) throw std::invalid_argument("cx_unitary: bad qubits");
  ComplexMatrix u = ComplexMatrix::identity(std::size_t{1} << qubits);
  left_apply_cx(u, control, target, qubits);
  return u;
}

ComplexMatrix VariationalCircuit::slot_unitary(std::size_t slot, std::span<const double> theta) const {
  if (theta.size() != parameter_count()) {
    std::ostringstream os;
    os << "ansatz expects " << parameter_count() << " parameters, got " << theta.size();
    throw std::invalid_argument(os.str());
  }
  ComplexMatrix u = ComplexMatrix::identity(std::size_t{1} << qubits_);
  for (const auto& g : gates_.at(slot)) {
    if (g.is_cx)
      left_apply_cx(u, g.qubit, g.target, qubits_);
    else
      left_apply_single(u, rotation_unitary(g.axis, theta[g.param]), g.qubit, qubits_);
  }
  return u;
}

std::vector<ComplexMatrix> VariationalCircuit::unitaries(std::span<const double> theta) const {
  std::vector<ComplexMatrix> out;
  for (std::size_t s = 0; s < gates_.size(); ++s) out.push_back(slot_unitary(s, theta));
  return out;
}

// ---------------------------------------------------------------------------
// Measurement and loss

ComplexMatrix parity_povm(std::size_t qubits) {
  if (qubits == 0) throw std::invalid_argument("parity_povm: need at least one qubit");
  const std::size_t dim = std::size_t{1} << qubits;
  std::vector<double> d(dim);
  for (std::size_t k = 0; k < dim; ++k) d[k] = std::popcount(k) % 2 == 1 ? 1.0 : 0.0;
  return ComplexMatrix::diagonal(d);
}

ComplexMatrix qubit_povm(std::size_t qubit, std::size_t qubits) {
  if (qubit >= qubits) throw std::invalid_argument("qubit_povm: qubit out of range");
  const std::size_t dim = std::size_t{1} << qubits;
  std::vector<double> d(dim);
  for (std::size_t k = 0; k < dim; ++k) d[k] = static_cast<double>(qubit_bit(k, qubit, qubits));
  return ComplexMatrix::diagonal(d);
}

void check_povm(const ComplexMatrix& povm, double tol) {
  if (!povm.square() || !is_power_of_two(povm.rows())) throw std::invalid_argument("POVM element must be square of size 2^d");
  const auto eig = eig_hermitian(povm, tol);
  if (eig.values.back() < -tol || eig.values.front() > 1.0 + tol) {
    std::ostringstream os;
    os << "POVM element must satisfy 0 <= Pi <= I; spectrum spans [" << eig.values.back() << ", " << eig.values.front()
       << "]";
    throw std::invalid_argument(os.str());
  }
}

namespace {
double clamp_probability(double p) { return std::clamp(p, 1e-9, 1.0 - 1e-9); }
}  // namespace

double bce_loss(double p, int label) {
  const double q = clamp_probability(p);
  return label == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double bce_loss_derivative(double p, int label) {
  const double q = clamp_probability(p);
  return label == 1 ? -1.0 / q : 1.0 / (1.0 - q);
}

// ---------------------------------------------------------------------------
// Front-end

LinearFrontEnd LinearFrontEnd::identity(std::size_t n) {
  LinearFrontEnd fe;
  fe.in_dim = fe.out_dim = n;
  fe.weight.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) fe.weight[i * n + i] = 1.0;
  fe.bias.assign(n, 0.0);
  return fe;
}

LinearFrontEnd LinearFrontEnd::random(std::size_t in_dim, std::size_t out_dim, double scale, std::uint64_t seed) {
  LinearFrontEnd fe;
  fe.in_dim = in_dim;
  fe.out_dim = out_dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale / std::sqrt(static_cast<double>(in_dim)));
  fe.weight.resize(in_dim * out_dim);
  for (auto& w : fe.weight) w = n(rng);
  fe.bias.assign(out_dim, 0.0);
  return fe;
}

void LinearFrontEnd::validate() const {
  if (weight.size() != in_dim * out_dim || bias.size() != out_dim)
    throw std::invalid_argument("LinearFrontEnd: weight/bias shapes do not match dimensions");
  for (double v : weight)
    if (!std::isfinite(v)) throw std::invalid_argument("LinearFrontEnd: non-finite weight");
  for (double v : bias)
    if (!std::isfinite(v)) throw std::invalid_argument("LinearFrontEnd: non-finite bias");
}

std::vector<double> LinearFrontEnd::forward(std::span<const double> x) const {
  if (x.size() != in_dim) {
    std::ostringstream os;
    os << "front-end expects " << in_dim << " inputs, got " << x.size();
    throw std::invalid_argument(os.str());
  }
  std::vector<double> out(bias);
  for (std::size_t i = 0; i < out_dim; ++i) {
    const double* row = weight.data() + i * in_dim;
    double s = 0.0;
    for (std::size_t j = 0; j < in_dim; ++j) s += row[j] * x[j];
    out[i] += s;
  }
  return out;
}

double LinearFrontEnd::spectral_norm() const {
  ComplexMatrix m(out_dim, in_dim);
  for (std::size_t k = 0; k < weight.size(); ++k) m.data()[k] = weight[k];
  return qsmooth::spectral_norm(m);
}

// ---------------------------------------------------------------------------
// Classifier

Classifier::Classifier(EncodingSpec encoding, VariationalCircuit ansatz, ComplexMatrix povm)
    : encoding_(std::move(encoding)), ansatz_(std::move(ansatz)), povm_(std::move(povm)) {
  encoding_.validate();
  if (ansatz_.slot_count() != encoding_.variational_slots.size())
    throw std::invalid_argument("Classifier: ansatz slot count differs from the encoding's variational slots");
  if (ansatz_.qubits() != encoding_.qubits) throw std::invalid_argument("Classifier: ansatz and encoding qubits differ");
  if (povm_.rows() != encoding_.dim()) throw std::invalid_argument("Classifier: POVM dimension differs from the encoding");
  check_povm(povm_);
  set_parameters(std::vector<double>(ansatz_.parameter_count(), 0.0));
}

void Classifier::set_parameters(std::vector<double> theta) {
  if (theta.size() != ansatz_.parameter_count()) {
    std::ostringstream os;
    os << "Classifier: expected " << ansatz_.parameter_count() << " parameters, got " << theta.size();
    throw std::invalid_argument(os.str());
  }
  unitaries_ = ansatz_.unitaries(theta);
  theta_ = std::move(theta);
}

void Classifier::randomize_parameters(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> t(ansatz_.parameter_count());
  for (auto& v : t) v = u(rng);
  set_parameters(std::move(t));
}

void Classifier::set_smoothing(std::optional<ClassifierSmoothing> smoothing) {
  plan_.reset();
  smoothing_ = std::move(smoothing);
  if (smoothing_) plan_ = make_smoothing_plan(encoding_, smoothing_->distribution, smoothing_->strategy);
}

void Classifier::set_frontend(std::optional<LinearFrontEnd> fe) {
  if (fe) {
    fe->validate();
    if (fe->out_dim < encoding_.feature_count())
      throw std::invalid_argument("Classifier: front-end output is smaller than the encoded feature count");
  }
  frontend_ = std::move(fe);
}

std::size_t Classifier::input_dim() const { return frontend_ ? frontend_->in_dim : encoding_.feature_count(); }

std::vector<double> Classifier::features(std::span<const double> x) const {
  if (frontend_) return frontend_->forward(x);
  if (x.size() < encoding_.feature_count()) {
    std::ostringstream os;
    os << "classifier expects " << encoding_.feature_count() << " features, got " << x.size();
    throw std::invalid_argument(os.str());
  }
  return {x.begin(), x.end()};
}

const EncodingSpec& Classifier::active_spec(bool smoothed) const {
  if (!smoothed) return encoding_;
  if (!plan_) throw std::logic_error("classifier has no smoothing configured");
  return plan_->spec;
}

double Classifier::evaluate(const EncodingSpec& spec, std::span<const double> inputs, std::span<const ComplexMatrix> w,
                            const std::vector<QuantumChannel>* channels) const {
  LayerHook hook;
  if (channels) hook = [channels](std::size_t l, ComplexMatrix& rho) { (*channels)[l].apply_in_place(rho); };
  const auto rho = sequential_state_layerwise(spec, inputs, w, hook);
  double y = 0.0;
  const std::size_t d = povm_.rows();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) y += (povm_(i, j) * rho.matrix()(j, i)).real();
  return std::clamp(y, 0.0, 1.0);
}

DensityMatrix Classifier::state(std::span<const double> z, bool smoothed) const {
  const auto& spec = active_spec(smoothed);
  const auto u = layer_inputs(spec, z);
  LayerHook hook;
  if (smoothed) hook = [this](std::size_t l, ComplexMatrix& rho) { plan_->channels[l].apply_in_place(rho); };
  return sequential_state_layerwise(spec, u, unitaries_, hook);
}

double Classifier::forward_features(std::span<const double> z, bool smoothed) const {
  const auto& spec = active_spec(smoothed);
  const auto u = layer_inputs(spec, z);
  return evaluate(spec, u, unitaries_, smoothed ? &plan_->channels : nullptr);
}

double Classifier::forward(std::span<const double> x) const {
  return forward_features(features(x), plan_.has_value());
}

double Classifier::forward_unsmoothed(std::span<const double> x) const { return forward_features(features(x), false); }

std::vector<double> Classifier::parameter_gradient(std::span<const double> z, bool smoothed, GradientMode mode,
                                                   double h) const {
  const auto& spec = active_spec(smoothed);
  const auto u = layer_inputs(spec, z);
  const auto* ch = smoothed ? &plan_->channels : nullptr;
  std::vector<double> grad(theta_.size());
  std::vector<double> t = theta_;
  std::vector<ComplexMatrix> w = unitaries_;
  const double shift = mode == GradientMode::ParameterShift ? M_PI / 2.0 : h;
  for (std::size_t p = 0; p < theta_.size(); ++p) {
    const std::size_t slot = ansatz_.slot_of_parameter(p);
    t[p] = theta_[p] + shift;
    w[slot] = ansatz_.slot_unitary(slot, t);
    const double plus = evaluate(spec, u, w, ch);
    t[p] = theta_[p] - shift;
    w[slot] = ansatz_.slot_unitary(slot, t);
    const double minus = evaluate(spec, u, w, ch);
    t[p] = theta_[p];
    w[slot] = unitaries_[slot];
    grad[p] = mode == GradientMode::ParameterShift ? 0.5 * (plus - minus) : (plus - minus) / (2.0 * h);
  }
  return grad;
}

std::vector<double> Classifier::feature_gradient(std::span<const double> z, bool smoothed, double h) const {
  const auto& spec = active_spec(smoothed);
  auto u = layer_inputs(spec, z);
  const auto* ch = smoothed ? &plan_->channels : nullptr;
  std::vector<double> grad(z.size(), 0.0);
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    const double u0 = u[l];
    double d;
    if (layer.gates.size() == 1) {
      const double alpha = layer.scale * layer.gates.front().scale;
      const double s = M_PI / (2.0 * alpha);
      u[l] = u0 + s;
      const double plus = evaluate(spec, u, unitaries_, ch);
      u[l] = u0 - s;
      const double minus = evaluate(spec, u, unitaries_, ch);
      d = 0.5 * alpha * (plus - minus);
    } else {
      u[l] = u0 + h;
      const double plus = evaluate(spec, u, unitaries_, ch);
      u[l] = u0 - h;
      const double minus = evaluate(spec, u, unitaries_, ch);
      d = (plus - minus) / (2.0 * h);
    }
    u[l] = u0;
    grad[layer.feature_index] += d;
  }
  return grad;
}

double Classifier::noise_weight() const {
  if (!plan_) throw std::logic_error("classifier has no smoothing configured");
  return plan_->max_noise_weight();
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct PointGrad {
  double loss = 0.0;
  std::vector<double> theta;
  std::vector<double> weight;
  std::vector<double> bias;
};

PointGrad point_gradient(const Classifier& model, std::span<const double> x, int label, const TrainConfig& cfg) {
  PointGrad g;
  const auto z = model.features(x);
  const double p = model.forward_features(z, cfg.smoothed);
  g.loss = bce_loss(p, label);
  const double dl = p <= 1e-9 || p >= 1.0 - 1e-9 ? 0.0 : bce_loss_derivative(p, label);
  g.theta = model.parameter_gradient(z, cfg.smoothed, cfg.mode, cfg.fd_step);
  for (auto& v : g.theta) v *= dl;
  if (const auto& fe = model.frontend()) {
    auto dz = model.feature_gradient(z, cfg.smoothed, cfg.fd_step);
    g.weight.assign(fe->weight.size(), 0.0);
    g.bias.assign(fe->out_dim, 0.0);
    for (std::size_t i = 0; i < fe->out_dim; ++i) {
      const double gi = i < dz.size() ? dl * dz[i] : 0.0;
      g.bias[i] = gi;
      if (gi == 0.0) continue;
      double* row = g.weight.data() + i * fe->in_dim;
      for (std::size_t j = 0; j < fe->in_dim; ++j) row[j] = gi * x[j];
    }
  }
  return g;
}

double mean_loss(const Classifier& model, const Dataset& data, bool smoothed, std::size_t threads) {
  std::vector<double> losses(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    losses[i] = bce_loss(model.forward_features(model.features(data.points[i]), smoothed), data.labels[i]);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
}

}  // namespace

TrainResult train(Classifier& model, const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch size must be >= 1");
  if (cfg.smoothed && !model.plan()) throw std::invalid_argument("train: smoothed training needs a smoothing config");
  const double fe_lr = cfg.frontend_learning_rate < 0.0 ? cfg.learning_rate : cfg.frontend_learning_rate;

  TrainResult result;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<PointGrad> grads(count);
      parallel_for(count, cfg.threads, [&](std::size_t k) {
        const std::size_t i = order[start + k];
        grads[k] = point_gradient(model, data.points[i], data.labels[i], cfg);
      });
      const double inv = 1.0 / static_cast<double>(count);
      std::vector<double> theta = model.parameters();
      for (const auto& g : grads)
        for (std::size_t p = 0; p < theta.size(); ++p) theta[p] -= cfg.learning_rate * inv * g.theta[p];
      model.set_parameters(std::move(theta));
      if (model.frontend()) {
        LinearFrontEnd fe = *model.frontend();
        for (const auto& g : grads) {
          for (std::size_t k = 0; k < fe.weight.size(); ++k) fe.weight[k] -= fe_lr * inv * g.weight[k];
          for (std::size_t k = 0; k < fe.bias.size(); ++k) fe.bias[k] -= fe_lr * inv * g.bias[k];
        }
        model.set_frontend(std::move(fe));
      }
    }
    result.loss.push_back(mean_loss(model, data, cfg.smoothed, cfg.threads));
  }
  return result;
}

double accuracy(const Classifier& model, const Dataset& data, std::size_t threads) {
  if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
  std::vector<int> ok(data.size());
  parallel_for(data.size(), threads,
               [&](std::size_t i) { ok[i] = model.predict(data.points[i]) == data.labels[i] ? 1 : 0; });
  return static_cast<double>(std::accumulate(ok.begin(), ok.end(), 0)) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Kernels

DensityMatrix kernel_state(const EncodingSpec& spec, const SmoothingPlan* plan, std::span<const double> x) {
  const std::vector<ComplexMatrix> ids(spec.variational_slots.size(), ComplexMatrix::identity(spec.dim()));
  if (plan) return smooth_sequential_state(*plan, x, ids);
  spec.validate();
  return sequential_state_layerwise(spec, layer_inputs(spec, x), ids);
}

double state_overlap(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("state_overlap: dimension mismatch");
  double s = 0.0;
  const std::size_t d = a.dim();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) s += (a(i, j) * b(j, i)).real();
  return s;
}

double kernel(const EncodingSpec& spec, const SmoothingPlan* plan, std::span<const double> x,
              std::span<const double> y) {
  return state_overlap(kernel_state(spec, plan, x), kernel_state(spec, plan, y));
}

KernelRidgeModel kernel_ridge_fit(std::span<const double> gram, std::size_t n, std::span<const int> labels,
                                  double ridge, double jitter) {
  if (gram.size() != n * n || labels.size() != n) throw std::invalid_argument("kernel_ridge_fit: shape mismatch");
  if (ridge < 0.0) throw std::invalid_argument("kernel_ridge_fit: ridge must be >= 0");
  std::vector<double> a(gram.begin(), gram.end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(a[i * n + j] - a[j * n + i]) > 1e-8) throw std::invalid_argument("kernel_ridge_fit: Gram matrix is not symmetric");
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += ridge + jitter;
  const std::vector<double> y(labels.begin(), labels.end());
  try {
    return {cholesky_solve(std::move(a), n, y)};
  } catch (const NumericError& e) {
    throw NumericError(std::string("kernel_ridge_fit: system is singular after jitter (") + e.what() + ")");
  }
}

double kernel_ridge_score(const KernelRidgeModel& model, std::span<const double> kvec) {
  if (kvec.size() != model.alpha.size()) throw std::invalid_argument("kernel_ridge_score: kernel vector length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < kvec.size(); ++i) s += model.alpha[i] * kvec[i];
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace qsmooth
