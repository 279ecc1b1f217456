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

#include "qsmooth/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsmooth/parallel.hpp"

namespace qsmooth {

// ---------------------------------------------------------------------------
// SmoothingDistribution

SmoothingDistribution SmoothingDistribution::gaussian(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian smoothing: sigma must be >= 0");
  SmoothingDistribution d;
  d.kind_ = Kind::Gaussian;
  d.parameter_ = sigma;
  std::ostringstream os;
  os << "gaussian(" << sigma << ")";
  d.label_ = os.str();
  d.phi_ = [sigma](double t) { return std::exp(-0.5 * sigma * sigma * t * t); };
  d.sampler_ = [sigma](std::mt19937_64& rng) {
    if (sigma == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng);
  };
  if (sigma > 0.0) {
    d.density_ = [sigma](double z) { return std::exp(-0.5 * z * z / (sigma * sigma)) / (sigma * std::sqrt(2.0 * M_PI)); };
  }
  return d;
}

SmoothingDistribution SmoothingDistribution::uniform_interval(double width) {
  if (!(width > 0.0) || !std::isfinite(width)) throw std::invalid_argument("uniform smoothing: width must be > 0");
  SmoothingDistribution d;
  d.kind_ = Kind::UniformInterval;
  d.parameter_ = width;
  std::ostringstream os;
  os << "uniform(" << width << ")";
  d.label_ = os.str();
  d.phi_ = [width](double t) {
    const double h = 0.5 * width * t;
    return std::abs(h) < 1e-8 ? 1.0 - h * h / 6.0 : std::sin(h) / h;
  };
  d.sampler_ = [width](std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(-0.5 * width, 0.5 * width)(rng);
  };
  d.density_ = [width](double z) { return std::abs(z) <= 0.5 * width ? 1.0 / width : 0.0; };
  return d;
}

SmoothingDistribution SmoothingDistribution::custom(std::string label, Characteristic phi, Sampler sampler,
                                                    std::optional<Density> density) {
  if (!phi || !sampler) throw std::invalid_argument("custom smoothing: characteristic function and sampler required");
  SmoothingDistribution d;
  d.kind_ = Kind::Custom;
  d.label_ = std::move(label);
  d.phi_ = std::move(phi);
  d.sampler_ = std::move(sampler);
  d.density_ = std::move(density);
  return d;
}

double SmoothingDistribution::density(double z) const {
  if (!density_) throw std::logic_error("smoothing distribution " + label_ + " has no density");
  return (*density_)(z);
}

// ---------------------------------------------------------------------------
// SmoothingMatrix / channels

ComplexMatrix SmoothingMatrix::as_complex() const {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n * n; ++i) m.data()[i] = entries[i];
  return m;
}

double SmoothingMatrix::min_eigenvalue() const { return eig_hermitian(as_complex()).values.back(); }

SmoothingMatrix build_A(const SmoothingDistribution& dist, std::span<const double> eigenvalues) {
  const double phi0 = dist.characteristic(0.0);
  if (std::abs(phi0 - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "build_A: characteristic function must satisfy phi(0) = 1, got " << phi0;
    throw std::invalid_argument(os.str());
  }
  SmoothingMatrix a;
  a.n = eigenvalues.size();
  a.entries.resize(a.n * a.n);
  for (std::size_t i = 0; i < a.n; ++i) {
    a.entries[i * a.n + i] = 1.0;
    for (std::size_t j = i + 1; j < a.n; ++j) {
      const double v = dist.characteristic(eigenvalues[j] - eigenvalues[i]);
      a.entries[i * a.n + j] = v;
      a.entries[j * a.n + i] = v;
    }
  }
  return a;
}

QuantumChannel::QuantumChannel(std::vector<ComplexMatrix> kraus, std::string label)
    : kraus_(std::move(kraus)), label_(std::move(label)) {
  if (kraus_.empty()) throw std::invalid_argument("QuantumChannel: at least one Kraus operator required");
  const std::size_t d = kraus_.front().rows();
  bool diagonal = true;
  for (const auto& e : kraus_) {
    if (e.rows() != d || e.cols() != d) throw std::invalid_argument("QuantumChannel: Kraus operators must share a square shape");
    for (std::size_t i = 0; i < d && diagonal; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (i != j && e(i, j) != cplx{0.0, 0.0}) {
          diagonal = false;
          break;
        }
  }
  if (diagonal) {
    ComplexMatrix mask(d, d);
    for (const auto& e : kraus_)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) mask(i, j) += e(i, i) * std::conj(e(j, j));
    mask_ = std::move(mask);
  }
}

double QuantumChannel::completeness_defect() const {
  ComplexMatrix s(dim(), dim());
  for (const auto& e : kraus_) s += e.adjoint() * e;
  return max_abs_diff(s, ComplexMatrix::identity(dim()));
}

void QuantumChannel::apply_in_place(ComplexMatrix& rho) const {
  if (rho.rows() != dim() || rho.cols() != dim()) {
    std::ostringstream os;
    os << "channel '" << label_ << "' acts on dimension " << dim() << ", state has " << rho.rows();
    throw std::invalid_argument(os.str());
  }
  if (mask_) {
    for (std::size_t i = 0; i < rho.data().size(); ++i) rho.data()[i] *= mask_->data()[i];
    return;
  }
  ComplexMatrix out(dim(), dim());
  for (const auto& e : kraus_) out += conjugate(e, rho);
  rho = std::move(out);
}

QuantumChannel kraus_from_A(const SmoothingMatrix& a, std::string label) {
  const auto eig = eig_hermitian(a.as_complex());
  const double smax = eig.values.front();
  if (eig.values.back() < -1e-10) {
    std::ostringstream os;
    os << "kraus_from_A: smoothing matrix is not PSD (eigenvalue " << eig.values.back() << ")";
    throw NumericError(os.str());
  }
  std::vector<ComplexMatrix> kraus;
  for (std::size_t k = 0; k < a.n; ++k) {
    const double s = eig.values[k];
    if (s <= 1e-12 * smax) continue;
    ComplexMatrix e(a.n, a.n);
    const double root = std::sqrt(s);
    for (std::size_t i = 0; i < a.n; ++i) e(i, i) = root * eig.vectors(i, k);
    kraus.push_back(std::move(e));
  }
  return QuantumChannel(std::move(kraus), std::move(label));
}

DensityMatrix apply_channel(const QuantumChannel& ch, const DensityMatrix& rho) {
  ComplexMatrix m = rho.matrix();
  ch.apply_in_place(m);
  return DensityMatrix::trusted(std::move(m));
}

QuantumChannel phase_damping(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("phase_damping: lambda must lie in [0, 1]");
  std::ostringstream os;
  os << "phase_damping(" << lambda << ")";
  return QuantumChannel({ComplexMatrix::diagonal(std::vector<double>{1.0, std::sqrt(1.0 - lambda)}),
                         ComplexMatrix::diagonal(std::vector<double>{0.0, std::sqrt(lambda)})},
                        os.str());
}

QuantumChannel phase_damping(double lambda, std::size_t qubit, std::size_t qubits) {
  const QuantumChannel single = phase_damping(lambda);
  std::vector<ComplexMatrix> kraus;
  for (const auto& e : single.kraus()) kraus.push_back(embed_single_qubit(e, qubit, qubits));
  std::ostringstream os;
  os << single.label() << "@q" << qubit;
  return QuantumChannel(std::move(kraus), os.str());
}

double pd_param(const SmoothingDistribution& dist, double scale) {
  const double phi = dist.characteristic(scale);
  return 1.0 - phi * phi;
}

QuantumChannel conjugated_channel(const QuantumChannel& ch, const ComplexMatrix& v) {
  if (v.rows() != ch.dim() || !is_unitary(v, 1e-10)) throw NumericError("conjugated_channel: V must be a unitary of the channel's dimension");
  std::vector<ComplexMatrix> kraus;
  for (const auto& e : ch.kraus()) kraus.push_back(conjugate(v, e));
  return QuantumChannel(std::move(kraus), ch.label() + "^V");
}

double nonlinear_pd_param(double sigma, double x1, double x2) {
  const double s2 = sigma * sigma;
  return 1.0 - std::exp(-s2 * (x1 * x1 + x2 * x2)) / (1.0 + s2 * s2);
}

MonteCarloEstimate nonlinear_pd_param_mc(const SmoothingDistribution& dist, double x1, double x2, std::size_t samples,
                                         std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("nonlinear_pd_param_mc: need at least two samples");
  std::mt19937_64 rng(seed);
  // E[exp(-i d1 d2)] is real for symmetric laws; average cos(d1 d2).
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double c = std::cos(dist.sample(rng) * dist.sample(rng));
    sum += c;
    sumsq += c * c;
  }
  const double n = static_cast<double>(samples);
  const double m = sum / n;
  const double se_m = std::sqrt(std::max(0.0, (sumsq - n * m * m) / (n - 1.0)) / n);
  const double p = dist.characteristic(x1) * dist.characteristic(x2);
  const double prod = p * m;
  return {1.0 - prod * prod, std::abs(2.0 * p * p * m) * se_m};
}

// ---------------------------------------------------------------------------
// Plans

EncodingSpec split_into_gate_layers(const EncodingSpec& spec, std::vector<std::size_t>* slot_map) {
  EncodingSpec out;
  out.qubits = spec.qubits;
  out.initial_state = spec.initial_state;
  std::vector<std::size_t> first_of(spec.layers.size() + 1);
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    first_of[l] = out.layers.size();
    const auto& layer = spec.layers[l];
    if (layer.gates.size() <= 1) {
      out.layers.push_back(layer);
      continue;
    }
    for (const auto& g : layer.gates) {
      const std::pair<std::size_t, double> qs[] = {{g.qubit, g.scale * layer.scale}};
      out.layers.push_back(rz_layer(spec.qubits, qs, layer.feature_index));
    }
  }
  first_of[spec.layers.size()] = out.layers.size();
  std::vector<std::size_t> map;
  for (std::size_t s : spec.variational_slots) {
    out.variational_slots.push_back(first_of[s]);
    map.push_back(first_of[s]);
  }
  if (slot_map) *slot_map = std::move(map);
  return out;
}

namespace {

QuantumChannel layer_channel(const EncodingLayer& layer, double multiplier, const SmoothingDistribution& dist,
                             std::size_t qubits, std::size_t index) {
  std::ostringstream os;
  os << "layer" << index << ":" << dist.label();
  if (layer.gates.size() == 1) {
    const auto& g = layer.gates.front();
    QuantumChannel pd = phase_damping(pd_param(dist, multiplier * layer.scale * g.scale), g.qubit, qubits);
    return QuantumChannel(pd.kraus(), os.str());
  }
  std::vector<double> lambda(layer.eigenvalues);
  for (auto& v : lambda) v *= multiplier * layer.scale;
  return kraus_from_A(build_A(dist, lambda), os.str());
}

}  // namespace

SmoothingPlan make_smoothing_plan(const EncodingSpec& spec, const SmoothingDistribution& dist,
                                  SmoothingStrategy strategy) {
  spec.validate();
  SmoothingPlan plan;
  if (strategy == SmoothingStrategy::Exponential) {
    plan.spec = spec;
    plan.slot_map = spec.variational_slots;
    plan.noise_multiplier.assign(spec.layers.size(), 1.0);
  } else {
    plan.spec = split_into_gate_layers(spec, &plan.slot_map);
    for (std::size_t l = 0; l < plan.spec.layers.size(); ++l) {
      const auto& layer = plan.spec.layers[l];
      if (layer.gates.size() != 1) {
        std::ostringstream os;
        os << "uniform smoothing needs layers built from rotation gates; layer " << l << " is a generic diagonal Hamiltonian";
        throw std::invalid_argument(os.str());
      }
      const double angle_scale = layer.scale * layer.gates.front().scale;
      if (angle_scale == 0.0) throw std::invalid_argument("uniform smoothing: gate with zero scale");
      plan.noise_multiplier.push_back(1.0 / std::abs(angle_scale));
    }
  }
  for (std::size_t l = 0; l < plan.spec.layers.size(); ++l)
    plan.channels.push_back(layer_channel(plan.spec.layers[l], plan.noise_multiplier[l], dist, plan.spec.qubits, l));
  return plan;
}

double SmoothingPlan::noise_weight(std::size_t feature) const {
  double w = 0.0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l)
    if (spec.layers[l].feature_index == feature) w += 1.0 / (noise_multiplier[l] * noise_multiplier[l]);
  return w;
}

double SmoothingPlan::max_noise_weight() const {
  double w = 0.0;
  for (std::size_t f = 0; f < spec.feature_count(); ++f) w = std::max(w, noise_weight(f));
  return w;
}

DensityMatrix smooth_sequential_state(const SmoothingPlan& plan, std::span<const double> x,
                                      std::span<const ComplexMatrix> variational) {
  const auto u = layer_inputs(plan.spec, x);
  return sequential_state_layerwise(plan.spec, u, variational,
                                    [&](std::size_t l, ComplexMatrix& rho) { plan.channels[l].apply_in_place(rho); });
}

DensityMatrix smooth_sequential_state(const EncodingSpec& spec, std::span<const double> x,
                                      std::span<const ComplexMatrix> variational, const SmoothingDistribution& dist) {
  check_variational(spec, variational);
  return smooth_sequential_state(make_smoothing_plan(spec, dist, SmoothingStrategy::Exponential), x, variational);
}

MonteCarloState mc_smoothed_state(const EncodingSpec& spec, std::span<const double> x,
                                  std::span<const ComplexMatrix> variational, const SmoothingDistribution& dist,
                                  const MonteCarloOptions& opts) {
  if (opts.samples == 0) throw std::invalid_argument("mc_smoothed_state: need at least one sample");
  spec.validate();
  check_variational(spec, variational);
  const auto base = layer_inputs(spec, x);
  std::vector<double> mult = opts.noise_multiplier;
  if (mult.empty()) mult.assign(spec.layers.size(), 1.0);
  if (mult.size() != spec.layers.size()) throw std::invalid_argument("mc_smoothed_state: one multiplier per layer");

  constexpr std::size_t kBatch = 1024;
  const std::size_t batches = (opts.samples + kBatch - 1) / kBatch;
  const std::size_t n2 = spec.dim() * spec.dim();
  struct Acc {
    std::vector<double> re, im, re2, im2;
  };
  std::vector<Acc> acc(batches);
  parallel_for(batches, opts.threads, [&](std::size_t b) {
    Acc a{std::vector<double>(n2), std::vector<double>(n2), std::vector<double>(n2), std::vector<double>(n2)};
    std::mt19937_64 rng(derive_seed(opts.seed, b));
    const std::size_t count = std::min(kBatch, opts.samples - b * kBatch);
    std::vector<double> u(base.size());
    for (std::size_t s = 0; s < count; ++s) {
      for (std::size_t l = 0; l < u.size(); ++l) u[l] = base[l] + mult[l] * dist.sample(rng);
      const auto rho = sequential_state_layerwise(spec, u, variational);
      const auto d = rho.matrix().data();
      for (std::size_t k = 0; k < n2; ++k) {
        a.re[k] += d[k].real();
        a.im[k] += d[k].imag();
        a.re2[k] += d[k].real() * d[k].real();
        a.im2[k] += d[k].imag() * d[k].imag();
      }
    }
    acc[b] = std::move(a);
  });

  std::vector<double> re(n2), im(n2), re2(n2), im2(n2);
  for (const auto& a : acc)
    for (std::size_t k = 0; k < n2; ++k) {
      re[k] += a.re[k];
      im[k] += a.im[k];
      re2[k] += a.re2[k];
      im2[k] += a.im2[k];
    }
  const double n = static_cast<double>(opts.samples);
  ComplexMatrix mean(spec.dim(), spec.dim());
  std::vector<double> se(n2, 0.0);
  for (std::size_t k = 0; k < n2; ++k) {
    mean.data()[k] = cplx{re[k] / n, im[k] / n};
    if (opts.samples > 1) {
      const double vr = std::max(0.0, (re2[k] - n * (re[k] / n) * (re[k] / n)) / (n - 1.0));
      const double vi = std::max(0.0, (im2[k] - n * (im[k] / n) * (im[k] / n)) / (n - 1.0));
      se[k] = std::sqrt(std::max(vr, vi) / n);
    }
  }
  return {DensityMatrix::trusted(std::move(mean)), std::move(se)};
}

}  // namespace qsmooth
