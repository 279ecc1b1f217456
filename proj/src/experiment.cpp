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

#include "qsmooth/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>

#include "qsmooth/parallel.hpp"

namespace qsmooth {

namespace fs = std::filesystem;

namespace {

std::string resolve_data_dir(const std::string& path) {
  if (fs::path(path).is_absolute() || fs::exists(path)) return path;
  const fs::path alt = fs::path(QSMOOTH_SOURCE_DIR) / path;
  return fs::exists(alt) ? alt.string() : path;
}

}  // namespace

DataSplit load_data(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  const std::uint64_t seed = cfg.component_seed(d.seed, seed_tag::kDataset);
  DataSplit out;
  if (d.kind == "mnist") {
    const fs::path dir = resolve_data_dir(d.path);
    out.train = mnist_binary((dir / "train-images-idx3-ubyte").string(), (dir / "train-labels-idx1-ubyte").string(),
                             d.digit_a, d.digit_b, d.train_per_class, seed);
    out.test = mnist_binary((dir / "test-images-idx3-ubyte").string(), (dir / "test-labels-idx1-ubyte").string(),
                            d.digit_a, d.digit_b, d.test_per_class, derive_seed(seed, 1));
    out.train.split = "train";
    out.test.split = "test";
    if (out.train.empty() || out.test.empty())
      throw std::runtime_error("mnist: no images of digits " + std::to_string(d.digit_a) + "/" +
                               std::to_string(d.digit_b) + " under " + dir.string());
    return out;
  }
  const Dataset all = d.kind == "two_moons" ? two_moons(d.n, d.noise, seed) : annular(d.n, seed);
  auto [train, test] = split(all, d.train_fraction, seed);
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

TrainOutcome run_training(const RunConfig& cfg, const DataSplit& data, std::size_t threads) {
  TrainOutcome out{build_classifier(cfg), {}, 0.0, 0.0, 0.0};
  TrainConfig tc = cfg.train.config;
  tc.seed = cfg.component_seed(cfg.train.seed, seed_tag::kTrain);
  tc.threads = threads;
  if (tc.smoothed && !out.model.smoothing())
    throw std::invalid_argument("train.smoothed is set but the smoothing block is disabled");
  out.result = train(out.model, data.train, tc);
  out.train_accuracy = accuracy(out.model, data.train, threads);
  out.test_accuracy = accuracy(out.model, data.test, threads);
  Classifier base = out.model;
  base.set_smoothing(std::nullopt);
  out.clean_test_accuracy = accuracy(base, data.test, threads);
  return out;
}

CertifyOptions certify_options(const RunConfig& cfg) {
  CertifyOptions o;
  o.mode = cfg.certify.mode;
  o.shots = cfg.certify.shots;
  o.confidence = 1.0 - cfg.certify.alpha;
  o.seed = cfg.component_seed(cfg.certify.seed, seed_tag::kCertify);
  o.uniform_formula = cfg.certify.uniform_formula;
  return o;
}

std::vector<CertifyOutcome> run_certification(const Classifier& model, const Dataset& data, const RunConfig& cfg,
                                              std::size_t threads) {
  if (!model.smoothing())
    throw std::invalid_argument(
        "the checkpoint has no smoothing; enable the smoothing block in the config and retrain, or certify "
        "with a config whose certify.sigmas lists the noise levels");
  const auto opts = certify_options(cfg);
  std::vector<double> sigmas = cfg.certify.sigmas;
  if (sigmas.empty()) sigmas.push_back(model.smoothing()->distribution.parameter());
  std::vector<CertifyOutcome> out;
  for (double sigma : sigmas) {
    Classifier m = model;
    m.set_smoothing(ClassifierSmoothing{SmoothingDistribution::gaussian(sigma), model.smoothing()->strategy});
    CertifyOutcome o;
    o.sigma = sigma;
    o.certificates = certify_dataset(m, data, opts, threads);
    o.curve = certified_curve(o.certificates, cfg.certify.radii);
    o.area = curve_area(o.curve);
    out.push_back(std::move(o));
  }
  return out;
}

AttackConfig attack_config(const RunConfig& cfg) {
  AttackConfig a;
  a.steps = cfg.attack.steps;
  a.restarts = cfg.attack.restarts;
  a.step_size = cfg.attack.step_size;
  a.fd_step = cfg.attack.fd_step;
  a.seed = cfg.component_seed(cfg.attack.seed, seed_tag::kAttack);
  return a;
}

AttackOutcome run_attack(const Classifier& model, const Dataset& data, const RunConfig& cfg, std::size_t threads) {
  if (cfg.attack.epsilons.empty()) throw std::invalid_argument("attack.epsilons is empty; nothing to attack");
  SemanticFn semantic;
  if (cfg.attack.semantic == "annular") semantic = semantic_check_annular;
  AttackOutcome out;
  out.curve = attack_curve(model, data, cfg.attack.epsilons, attack_config(cfg), semantic, threads);
  const auto& s = model.smoothing();
  if (s && s->distribution.kind() == SmoothingDistribution::Kind::Gaussian) {
    const auto certs = certify_dataset(model, data, certify_options(cfg), threads);
    out.certified = certified_curve(certs, cfg.attack.epsilons);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

EncodingSpec kernel_encoding(std::size_t qubits, std::size_t dims) {
  if (dims != 1 && dims != 2) throw std::invalid_argument("kernel_encoding: dims must be 1 or 2");
  if (qubits < dims) throw std::invalid_argument("kernel_encoding: need at least one qubit per dimension");
  EncodingSpec spec;
  spec.qubits = qubits;
  std::size_t first = 0;
  for (std::size_t d = 0; d < dims; ++d) {
    const std::size_t width = qubits / dims + (d < qubits % dims ? 1 : 0);
    spec.layers.push_back(exponential_layer(qubits, first, width, d, 1.0));
    first += width;
  }
  spec.initial_state = DensityMatrix::pure(uniform_superposition(qubits));
  return spec;
}

namespace {

struct KernelStates {
  EncodingSpec spec;
  std::optional<SmoothingPlan> exp_plan, uni_plan;

  explicit KernelStates(const KernelBlock& k) : spec(kernel_encoding(k.qubits, k.dims)) {
    if (k.sigma > 0.0) {
      const auto d = SmoothingDistribution::gaussian(k.sigma);
      exp_plan = make_smoothing_plan(spec, d, SmoothingStrategy::Exponential);
      uni_plan = make_smoothing_plan(spec, d, SmoothingStrategy::Uniform);
    }
  }
  std::array<DensityMatrix, 3> states(std::span<const double> x) const {
    return {kernel_state(spec, nullptr, x), kernel_state(spec, exp_plan ? &*exp_plan : nullptr, x),
            kernel_state(spec, uni_plan ? &*uni_plan : nullptr, x)};
  }
};

void min_max(std::vector<KernelRow>& rows, double KernelRow::*col) {
  double lo = rows.front().*col, hi = lo;
  for (const auto& r : rows) {
    lo = std::min(lo, r.*col);
    hi = std::max(hi, r.*col);
  }
  for (auto& r : rows) r.*col = hi > lo ? (r.*col - lo) / (hi - lo) : 1.0;
}

}  // namespace

std::vector<KernelRow> kernel_grid(const KernelBlock& k, bool rescale) {
  const KernelStates ks(k);
  const std::vector<double> origin(k.dims, 0.0);
  const auto ref = ks.states(origin);
  std::vector<double> axis(k.grid_points);
  for (std::size_t i = 0; i < k.grid_points; ++i)
    axis[i] = k.grid_min + (k.grid_max - k.grid_min) * static_cast<double>(i) / static_cast<double>(k.grid_points - 1);
  std::vector<KernelRow> rows;
  const std::size_t n = k.dims == 1 ? k.grid_points : k.grid_points * k.grid_points;
  for (std::size_t i = 0; i < n; ++i) {
    KernelRow row;
    if (k.dims == 1) row.point = {axis[i]};
    else row.point = {axis[i / k.grid_points], axis[i % k.grid_points]};
    const auto s = ks.states(row.point);
    row.unsmoothed = state_overlap(ref[0], s[0]);
    row.exponential = state_overlap(ref[1], s[1]);
    row.uniform = state_overlap(ref[2], s[2]);
    rows.push_back(std::move(row));
  }
  if (rescale) {
    min_max(rows, &KernelRow::unsmoothed);
    min_max(rows, &KernelRow::exponential);
    min_max(rows, &KernelRow::uniform);
  }
  return rows;
}

double kernel_l2_deviation(const std::vector<KernelRow>& rows, SmoothingStrategy strategy) {
  double s = 0.0;
  for (const auto& r : rows) {
    const double d = (strategy == SmoothingStrategy::Exponential ? r.exponential : r.uniform) - r.unsmoothed;
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<KernelRidgeReport> kernel_ridge_study(const KernelBlock& k, const DataSplit& data, std::size_t threads) {
  data.train.validate();
  data.test.validate();
  if (data.train.dim() != k.dims || data.test.dim() != k.dims)
    throw std::invalid_argument("kernel ridge: data dimension " + std::to_string(data.train.dim()) +
                                " does not match kernel.dims " + std::to_string(k.dims));
  const KernelStates ks(k);
  const std::size_t n = data.train.size(), m = data.test.size();
  std::vector<std::array<DensityMatrix, 3>> tr(n, ks.states(data.train.points[0]));
  std::vector<std::array<DensityMatrix, 3>> te(m, tr[0]);
  parallel_for(n, threads, [&](std::size_t i) { tr[i] = ks.states(data.train.points[i]); });
  parallel_for(m, threads, [&](std::size_t i) { te[i] = ks.states(data.test.points[i]); });

  const char* names[] = {"unsmoothed", "exponential", "uniform"};
  std::vector<KernelRidgeReport> out;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> gram(n * n);
    parallel_for(n, threads, [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j) gram[i * n + j] = state_overlap(tr[i][c], tr[j][c]);
    });
    const auto model = kernel_ridge_fit(gram, n, data.train.labels, k.ridge);
    auto acc = [&](const std::vector<std::array<DensityMatrix, 3>>& pts, const Dataset& ds) {
      std::size_t ok = 0;
      std::vector<double> kv(n);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < n; ++j) kv[j] = state_overlap(pts[i][c], tr[j][c]);
        ok += predict_from_probability(kernel_ridge_score(model, kv)) == ds.labels[i];
      }
      return static_cast<double>(ok) / static_cast<double>(pts.size());
    };
    out.push_back({names[c], acc(tr, data.train), acc(te, data.test)});
  }
  return out;
}

}  // namespace qsmooth
