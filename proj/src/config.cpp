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

#include "qsmooth/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "qsmooth/parallel.hpp"

namespace qsmooth {

using json = nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

template <class T>
T convert(const json& j, const std::string& path);

template <>
double convert<double>(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

template <>
std::uint64_t convert<std::uint64_t>(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) throw ConfigError(path, "must be >= 0");
  throw ConfigError(path, "expected a non-negative integer");
}

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "size_t reads go through the uint64_t conversion");

template <>
int convert<int>(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

template <>
bool convert<bool>(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

template <>
std::string convert<std::string>(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

template <>
std::vector<double> convert<std::vector<double>>(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(convert<double>(j[i], index_path(path, i)));
  return out;
}

template <>
std::vector<std::size_t> convert<std::vector<std::size_t>>(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(convert<std::size_t>(j[i], index_path(path, i)));
  return out;
}

// Object reader that remembers which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string at(const std::string& key) const { return join(path_, key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_[key], at(key));
  }
  template <class T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key), "required field is missing");
    return convert<T>(j_[key], at(key));
  }
  template <class T>
  std::optional<T> optional(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key) || j_[key].is_null()) return std::nullopt;
    return convert<T>(j_[key], at(key));
  }
  const json* child(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_[key] : nullptr;
  }
  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError(at(item.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void check(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

template <class T>
void check_one_of(const T& value, std::initializer_list<T> allowed, const std::string& path) {
  if (std::find(allowed.begin(), allowed.end(), value) != allowed.end()) return;
  std::ostringstream os;
  os << "got '" << value << "', expected one of";
  for (const auto& a : allowed) os << " '" << a << "'";
  throw ConfigError(path, os.str());
}

void check_ascending(const std::vector<double>& v, const std::string& path) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    check(v[i] >= 0.0, index_path(path, i), "must be >= 0");
    check(i == 0 || v[i] > v[i - 1], index_path(path, i), "values must be strictly ascending");
  }
}

DatasetConfig parse_dataset(const json& j, const std::string& path) {
  Reader r(j, path);
  DatasetConfig d;
  d.kind = r.get<std::string>("kind", d.kind);
  check_one_of<std::string>(d.kind, {"two_moons", "annular", "mnist"}, r.at("kind"));
  d.n = r.get<std::size_t>("n", d.n);
  check(d.n >= 4, r.at("n"), "need at least 4 points");
  d.noise = r.get<double>("noise", d.noise);
  check(d.noise >= 0.0, r.at("noise"), "must be >= 0");
  d.train_fraction = r.get<double>("train_fraction", d.train_fraction);
  check(d.train_fraction > 0.0 && d.train_fraction < 1.0, r.at("train_fraction"), "must lie in (0, 1)");
  d.seed = r.optional<std::uint64_t>("seed");
  d.path = r.get<std::string>("path", d.path);
  d.digit_a = r.get<int>("digit_a", d.digit_a);
  d.digit_b = r.get<int>("digit_b", d.digit_b);
  check(d.digit_a >= 0 && d.digit_a <= 9, r.at("digit_a"), "must be a digit 0..9");
  check(d.digit_b >= 0 && d.digit_b <= 9 && d.digit_b != d.digit_a, r.at("digit_b"), "must be a digit 0..9 other than digit_a");
  d.train_per_class = r.get<std::size_t>("train_per_class", d.train_per_class);
  d.test_per_class = r.get<std::size_t>("test_per_class", d.test_per_class);
  check(d.train_per_class >= 1, r.at("train_per_class"), "must be >= 1");
  check(d.test_per_class >= 1, r.at("test_per_class"), "must be >= 1");
  r.finish();
  return d;
}

LayerConfig parse_layer(const json& j, const std::string& path, std::size_t qubits) {
  Reader r(j, path);
  LayerConfig l;
  l.type = r.require<std::string>("type");
  check_one_of<std::string>(l.type, {"exponential", "rz", "rz_block", "diagonal"}, r.at("type"));
  l.feature = r.get<std::size_t>("feature", 0);
  l.scale = r.get<double>("scale", 1.0);
  check(l.scale != 0.0, r.at("scale"), "must be nonzero");
  if (l.type == "exponential") {
    l.first_qubit = r.get<std::size_t>("first_qubit", 0);
    check(l.first_qubit < qubits, r.at("first_qubit"), "outside the register");
    l.width = r.get<std::size_t>("width", qubits - l.first_qubit);
    check(l.width >= 1 && l.first_qubit + l.width <= qubits, r.at("width"), "layer does not fit in the register");
  } else if (l.type == "rz") {
    const json* g = r.child("gates");
    check(g && g->is_array() && !g->empty(), r.at("gates"), "expected a non-empty array of [qubit, scale] pairs");
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < g->size(); ++i) {
      const auto p = index_path(r.at("gates"), i);
      check((*g)[i].is_array() && (*g)[i].size() == 2, p, "expected [qubit, scale]");
      const auto q = convert<std::size_t>((*g)[i][0], p + "[0]");
      check(q < qubits, p + "[0]", "qubit outside the register");
      check(seen.insert(q).second, p + "[0]", "qubit listed twice");
      l.gates.emplace_back(q, convert<double>((*g)[i][1], p + "[1]"));
    }
  } else if (l.type == "rz_block") {
    l.first_qubit = r.get<std::size_t>("first_qubit", 0);
    l.features = r.require<std::vector<std::size_t>>("features");
    check(!l.features.empty(), r.at("features"), "must not be empty");
    check(l.first_qubit + l.features.size() <= qubits, r.at("features"), "more features than qubits available");
  } else {
    l.eigenvalues = r.require<std::vector<double>>("eigenvalues");
    check(l.eigenvalues.size() == (std::size_t{1} << qubits), r.at("eigenvalues"), "length must be 2^qubits");
  }
  r.finish();
  return l;
}

ModelConfig parse_model(const json& j, const std::string& path) {
  Reader r(j, path);
  ModelConfig m;
  m.qubits = r.require<std::size_t>("qubits");
  check(m.qubits >= 1 && m.qubits <= 6, r.at("qubits"), "must lie in 1..6");
  m.initial_state = r.get<std::string>("initial_state", m.initial_state);
  check_one_of<std::string>(m.initial_state, {"zero", "uniform"}, r.at("initial_state"));
  const json* layers = r.child("layers");
  check(layers && layers->is_array(), r.at("layers"), "expected an array of layers");
  for (std::size_t i = 0; i < layers->size(); ++i)
    m.layers.push_back(parse_layer((*layers)[i], index_path(r.at("layers"), i), m.qubits));
  const json* ansatz = r.child("ansatz");
  if (ansatz) {
    check(ansatz->is_array(), r.at("ansatz"), "expected an array of blocks");
    for (std::size_t i = 0; i < ansatz->size(); ++i) {
      Reader b((*ansatz)[i], index_path(r.at("ansatz"), i));
      AnsatzBlock blk;
      blk.slot = b.require<std::size_t>("slot");
      check(blk.slot <= m.layers.size(), b.at("slot"), "slot must be <= the number of layer entries");
      const auto kind = b.get<std::string>("kind", "two_local");
      try {
        blk.kind = ansatz_kind_from_string(kind);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(b.at("kind"), e.what());
      }
      blk.reps = b.get<std::size_t>("reps", 1);
      check(blk.reps >= 1, b.at("reps"), "must be >= 1");
      b.finish();
      m.ansatz.push_back(blk);
    }
  }
  m.povm = r.get<std::string>("povm", m.povm);
  check_one_of<std::string>(m.povm, {"parity", "qubit"}, r.at("povm"));
  m.povm_qubit = r.get<std::size_t>("povm_qubit", 0);
  check(m.povm_qubit < m.qubits, r.at("povm_qubit"), "outside the register");
  if (const json* fe = r.child("frontend"); fe && !fe->is_null()) {
    Reader f(*fe, r.at("frontend"));
    FrontEndConfig c;
    c.in_dim = f.require<std::size_t>("in_dim");
    c.out_dim = f.require<std::size_t>("out_dim");
    check(c.in_dim >= 1, f.at("in_dim"), "must be >= 1");
    check(c.out_dim >= 1, f.at("out_dim"), "must be >= 1");
    c.scale = f.get<double>("scale", 1.0);
    check(c.scale > 0.0, f.at("scale"), "must be > 0");
    c.seed = f.optional<std::uint64_t>("seed");
    f.finish();
    m.frontend = c;
  }
  m.init_scale = r.get<double>("init_scale", m.init_scale);
  check(m.init_scale >= 0.0, r.at("init_scale"), "must be >= 0");
  m.init_seed = r.optional<std::uint64_t>("init_seed");
  r.finish();
  return m;
}

SmoothingConfig parse_smoothing(const json& j, const std::string& path) {
  Reader r(j, path);
  SmoothingConfig s;
  s.enabled = r.get<bool>("enabled", true);
  s.distribution = r.get<std::string>("distribution", s.distribution);
  check_one_of<std::string>(s.distribution, {"gaussian", "uniform"}, r.at("distribution"));
  s.sigma = r.get<double>("sigma", s.sigma);
  check(s.sigma > 0.0, r.at("sigma"), "must be > 0");
  const auto strategy = r.get<std::string>("strategy", "exponential");
  check_one_of<std::string>(strategy, {"exponential", "uniform"}, r.at("strategy"));
  s.strategy = strategy == "exponential" ? SmoothingStrategy::Exponential : SmoothingStrategy::Uniform;
  r.finish();
  return s;
}

TrainBlock parse_train(const json& j, const std::string& path) {
  Reader r(j, path);
  TrainBlock t;
  auto& c = t.config;
  c.learning_rate = r.get<double>("learning_rate", c.learning_rate);
  check(c.learning_rate > 0.0, r.at("learning_rate"), "must be > 0");
  c.frontend_learning_rate = r.get<double>("frontend_learning_rate", c.learning_rate);
  check(c.frontend_learning_rate > 0.0, r.at("frontend_learning_rate"), "must be > 0");
  c.epochs = r.get<std::size_t>("epochs", c.epochs);
  c.batch_size = r.get<std::size_t>("batch_size", c.batch_size);
  check(c.batch_size >= 1, r.at("batch_size"), "must be >= 1");
  const auto mode = r.get<std::string>("gradient", "parameter_shift");
  check_one_of<std::string>(mode, {"parameter_shift", "finite_difference"}, r.at("gradient"));
  c.mode = mode == "parameter_shift" ? GradientMode::ParameterShift : GradientMode::FiniteDifference;
  c.fd_step = r.get<double>("fd_step", c.fd_step);
  check(c.fd_step > 0.0, r.at("fd_step"), "must be > 0");
  c.smoothed = r.get<bool>("smoothed", c.smoothed);
  t.seed = r.optional<std::uint64_t>("seed");
  r.finish();
  return t;
}

std::vector<double> default_radii() {
  std::vector<double> r;
  for (int k = 0; k <= 100; ++k) r.push_back(0.01 * k);
  return r;
}

CertifyBlock parse_certify(const json& j, const std::string& path) {
  Reader r(j, path);
  CertifyBlock c;
  const auto mode = r.get<std::string>("mode", "exact");
  check_one_of<std::string>(mode, {"exact", "shots"}, r.at("mode"));
  c.mode = mode == "exact" ? CertifyMode::Exact : CertifyMode::Shots;
  c.shots = r.get<std::size_t>("shots", c.shots);
  check(c.shots >= 1, r.at("shots"), "must be >= 1");
  c.alpha = r.get<double>("alpha", c.alpha);
  check(c.alpha > 0.0 && c.alpha < 1.0, r.at("alpha"), "must lie in (0, 1)");
  c.radii = r.get<std::vector<double>>("radii", default_radii());
  check(!c.radii.empty(), r.at("radii"), "must not be empty");
  check_ascending(c.radii, r.at("radii"));
  c.sigmas = r.get<std::vector<double>>("sigmas", {});
  for (std::size_t i = 0; i < c.sigmas.size(); ++i) check(c.sigmas[i] > 0.0, index_path(r.at("sigmas"), i), "must be > 0");
  const auto formula = r.get<std::string>("uniform_formula", "conservative");
  check_one_of<std::string>(formula, {"conservative", "reduced"}, r.at("uniform_formula"));
  c.uniform_formula = uniform_formula_from_string(formula);
  c.seed = r.optional<std::uint64_t>("seed");
  r.finish();
  return c;
}

AttackBlock parse_attack(const json& j, const std::string& path) {
  Reader r(j, path);
  AttackBlock a;
  a.epsilons = r.get<std::vector<double>>("epsilons", {});
  check_ascending(a.epsilons, r.at("epsilons"));
  a.steps = r.get<std::size_t>("steps", a.steps);
  check(a.steps >= 1, r.at("steps"), "must be >= 1");
  a.restarts = r.get<std::size_t>("restarts", a.restarts);
  check(a.restarts >= 1, r.at("restarts"), "must be >= 1");
  a.step_size = r.get<double>("step_size", a.step_size);
  a.fd_step = r.get<double>("fd_step", a.fd_step);
  check(a.fd_step > 0.0, r.at("fd_step"), "must be > 0");
  a.semantic = r.get<std::string>("semantic", a.semantic);
  check_one_of<std::string>(a.semantic, {"none", "annular"}, r.at("semantic"));
  a.seed = r.optional<std::uint64_t>("seed");
  r.finish();
  return a;
}

KernelBlock parse_kernel(const json& j, const std::string& path) {
  Reader r(j, path);
  KernelBlock k;
  k.qubits = r.get<std::size_t>("qubits", k.qubits);
  check(k.qubits >= 1 && k.qubits <= 6, r.at("qubits"), "must lie in 1..6");
  k.sigma = r.get<double>("sigma", k.sigma);
  check(k.sigma >= 0.0, r.at("sigma"), "must be >= 0");
  k.grid_min = r.get<double>("grid_min", k.grid_min);
  k.grid_max = r.get<double>("grid_max", k.grid_max);
  check(k.grid_max > k.grid_min, r.at("grid_max"), "must exceed grid_min");
  k.grid_points = r.get<std::size_t>("grid_points", k.grid_points);
  check(k.grid_points >= 2, r.at("grid_points"), "must be >= 2");
  k.dims = r.get<std::size_t>("dims", k.dims);
  check(k.dims == 1 || k.dims == 2, r.at("dims"), "must be 1 or 2");
  k.ridge = r.get<double>("ridge", k.ridge);
  check(k.ridge >= 0.0, r.at("ridge"), "must be >= 0");
  r.finish();
  return k;
}

std::size_t plan_feature_count(const ModelConfig& m) {
  std::size_t n = 0;
  for (const auto& l : m.layers) {
    if (l.type == "rz_block")
      for (auto f : l.features) n = std::max(n, f + 1);
    else
      n = std::max(n, l.feature + 1);
  }
  return n;
}

void check_consistency(const RunConfig& c) {
  const std::size_t features = plan_feature_count(c.model);
  if (c.model.frontend) {
    check(c.model.frontend->out_dim >= features, "model.frontend.out_dim",
          "the layer plan reads " + std::to_string(features) + " features");
    if (c.dataset.kind != "mnist")
      check(c.model.frontend->in_dim == 2, "model.frontend.in_dim", "2-D datasets need in_dim 2");
  } else {
    check(c.dataset.kind != "mnist", "model.frontend", "the mnist dataset needs a front-end (784 inputs)");
    check(features <= 2, "model.layers", "the layer plan reads more features than the 2-D dataset has");
  }
  if (c.model.frontend && c.dataset.kind == "mnist")
    check(c.model.frontend->in_dim == 784, "model.frontend.in_dim", "mnist images have 784 pixels");
  if (c.smoothing.enabled && c.smoothing.strategy == SmoothingStrategy::Uniform)
    for (std::size_t i = 0; i < c.model.layers.size(); ++i)
      check(c.model.layers[i].type != "diagonal", index_path("model.layers", i),
            "uniform smoothing needs gate-built layers");
}

}  // namespace

std::uint64_t RunConfig::component_seed(const std::optional<std::uint64_t>& explicit_seed, std::uint64_t tag) const {
  return explicit_seed ? *explicit_seed : derive_seed(seed, tag);
}

void RunConfig::override_seed(std::uint64_t s) {
  seed = s;
  dataset.seed.reset();
  model.init_seed.reset();
  if (model.frontend) model.frontend->seed.reset();
  train.seed.reset();
  certify.seed.reset();
  attack.seed.reset();
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  Reader r(j, "");
  RunConfig c;
  c.experiment = r.get<std::string>("experiment", c.experiment);
  c.seed = r.get<std::uint64_t>("seed", 0);
  c.output_dir = r.get<std::string>("output_dir", c.output_dir);
  if (const json* d = r.child("dataset")) c.dataset = parse_dataset(*d, "dataset");
  const json* m = r.child("model");
  if (!m) throw ConfigError("model", "required block is missing");
  c.model = parse_model(*m, "model");
  if (const json* s = r.child("smoothing"); s && !s->is_null()) c.smoothing = parse_smoothing(*s, "smoothing");
  if (const json* t = r.child("train")) c.train = parse_train(*t, "train");
  if (const json* t = r.child("certify")) c.certify = parse_certify(*t, "certify");
  else c.certify.radii = default_radii();
  if (const json* t = r.child("attack")) c.attack = parse_attack(*t, "attack");
  if (const json* t = r.child("kernel")) c.kernel = parse_kernel(*t, "kernel");
  r.finish();
  check_consistency(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

namespace {

json seed_json(const std::optional<std::uint64_t>& s) { return s ? json(*s) : json(nullptr); }

}  // namespace

std::string dump_run_config(const RunConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  const auto& d = c.dataset;
  j["dataset"] = {{"kind", d.kind},
                  {"n", d.n},
                  {"noise", d.noise},
                  {"train_fraction", d.train_fraction},
                  {"seed", seed_json(d.seed)},
                  {"path", d.path},
                  {"digit_a", d.digit_a},
                  {"digit_b", d.digit_b},
                  {"train_per_class", d.train_per_class},
                  {"test_per_class", d.test_per_class}};
  json layers = json::array();
  for (const auto& l : c.model.layers) {
    json e = {{"type", l.type}, {"scale", l.scale}};
    if (l.type == "exponential") {
      e["feature"] = l.feature;
      e["first_qubit"] = l.first_qubit;
      e["width"] = l.width;
    } else if (l.type == "rz") {
      e["feature"] = l.feature;
      json g = json::array();
      for (const auto& [q, s] : l.gates) g.push_back({q, s});
      e["gates"] = g;
    } else if (l.type == "rz_block") {
      e["first_qubit"] = l.first_qubit;
      e["features"] = l.features;
    } else {
      e["feature"] = l.feature;
      e["eigenvalues"] = l.eigenvalues;
    }
    layers.push_back(e);
  }
  json ansatz = json::array();
  for (const auto& b : c.model.ansatz) ansatz.push_back({{"slot", b.slot}, {"kind", to_string(b.kind)}, {"reps", b.reps}});
  j["model"] = {{"qubits", c.model.qubits},   {"initial_state", c.model.initial_state}, {"layers", layers},
                {"ansatz", ansatz},           {"povm", c.model.povm},                   {"povm_qubit", c.model.povm_qubit},
                {"init_scale", c.model.init_scale}, {"init_seed", seed_json(c.model.init_seed)}};
  if (const auto& fe = c.model.frontend)
    j["model"]["frontend"] = {
        {"in_dim", fe->in_dim}, {"out_dim", fe->out_dim}, {"scale", fe->scale}, {"seed", seed_json(fe->seed)}};
  else
    j["model"]["frontend"] = nullptr;
  j["smoothing"] = {{"enabled", c.smoothing.enabled},
                    {"distribution", c.smoothing.distribution},
                    {"sigma", c.smoothing.sigma},
                    {"strategy", to_string(c.smoothing.strategy)}};
  const auto& t = c.train.config;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"frontend_learning_rate", t.frontend_learning_rate},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"gradient", t.mode == GradientMode::ParameterShift ? "parameter_shift" : "finite_difference"},
                {"fd_step", t.fd_step},
                {"smoothed", t.smoothed},
                {"seed", seed_json(c.train.seed)}};
  j["certify"] = {{"mode", to_string(c.certify.mode)},
                  {"shots", c.certify.shots},
                  {"alpha", c.certify.alpha},
                  {"radii", c.certify.radii},
                  {"sigmas", c.certify.sigmas},
                  {"uniform_formula", to_string(c.certify.uniform_formula)},
                  {"seed", seed_json(c.certify.seed)}};
  j["attack"] = {{"epsilons", c.attack.epsilons}, {"steps", c.attack.steps},     {"restarts", c.attack.restarts},
                 {"step_size", c.attack.step_size}, {"fd_step", c.attack.fd_step}, {"semantic", c.attack.semantic},
                 {"seed", seed_json(c.attack.seed)}};
  j["kernel"] = {{"qubits", c.kernel.qubits},         {"sigma", c.kernel.sigma},
                 {"grid_min", c.kernel.grid_min},     {"grid_max", c.kernel.grid_max},
                 {"grid_points", c.kernel.grid_points}, {"dims", c.kernel.dims},
                 {"ridge", c.kernel.ridge}};
  return j.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump_run_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Model construction

EncodingSpec build_encoding(const ModelConfig& m, std::vector<std::size_t>* entry_to_layer) {
  EncodingSpec spec;
  spec.qubits = m.qubits;
  std::vector<std::size_t> map;
  for (const auto& l : m.layers) {
    map.push_back(spec.layers.size());
    if (l.type == "exponential") {
      spec.layers.push_back(exponential_layer(m.qubits, l.first_qubit, l.width, l.feature, l.scale));
    } else if (l.type == "rz") {
      spec.layers.push_back(rz_layer(m.qubits, l.gates, l.feature));
    } else if (l.type == "rz_block") {
      for (std::size_t k = 0; k < l.features.size(); ++k) {
        const std::pair<std::size_t, double> g[] = {{l.first_qubit + k, l.scale}};
        spec.layers.push_back(rz_layer(m.qubits, g, l.features[k]));
      }
    } else {
      spec.layers.push_back(EncodingLayer::diagonal(l.eigenvalues, l.feature, l.scale));
    }
  }
  map.push_back(spec.layers.size());
  std::set<std::size_t> slots;
  for (const auto& b : m.ansatz) slots.insert(map.at(b.slot));
  spec.variational_slots.assign(slots.begin(), slots.end());
  if (m.initial_state == "uniform") spec.initial_state = DensityMatrix::pure(uniform_superposition(m.qubits));
  if (entry_to_layer) *entry_to_layer = std::move(map);
  return spec;
}

std::optional<ClassifierSmoothing> build_smoothing(const SmoothingConfig& s) {
  if (!s.enabled) return std::nullopt;
  auto dist = s.distribution == "gaussian" ? SmoothingDistribution::gaussian(s.sigma)
                                           : SmoothingDistribution::uniform_interval(s.sigma);
  return ClassifierSmoothing{std::move(dist), s.strategy};
}

Classifier build_classifier(const RunConfig& cfg) {
  const auto& m = cfg.model;
  std::vector<std::size_t> map;
  EncodingSpec spec = build_encoding(m, &map);
  std::vector<AnsatzBlock> blocks;
  for (auto b : m.ansatz) {
    const auto layer_slot = map.at(b.slot);
    b.slot = static_cast<std::size_t>(
        std::lower_bound(spec.variational_slots.begin(), spec.variational_slots.end(), layer_slot) -
        spec.variational_slots.begin());
    blocks.push_back(b);
  }
  VariationalCircuit circuit(m.qubits, spec.variational_slots.size(), blocks);
  ComplexMatrix povm = m.povm == "parity" ? parity_povm(m.qubits) : qubit_povm(m.povm_qubit, m.qubits);
  Classifier model(std::move(spec), std::move(circuit), std::move(povm));
  model.randomize_parameters(cfg.component_seed(m.init_seed, seed_tag::kInit), m.init_scale);
  if (m.frontend)
    model.set_frontend(LinearFrontEnd::random(m.frontend->in_dim, m.frontend->out_dim, m.frontend->scale,
                                              cfg.component_seed(m.frontend->seed, seed_tag::kFrontEnd)));
  model.set_smoothing(build_smoothing(cfg.smoothing));
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json matrix_json(const ComplexMatrix& m) {
  json re = json::array(), im = json::array();
  for (const auto& v : m.data()) {
    re.push_back(v.real());
    im.push_back(v.imag());
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"real", re}, {"imag", im}};
}

ComplexMatrix matrix_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  const auto rows = r.require<std::size_t>("rows"), cols = r.require<std::size_t>("cols");
  const auto re = r.require<std::vector<double>>("real"), im = r.require<std::vector<double>>("imag");
  r.finish();
  check(re.size() == rows * cols && im.size() == rows * cols, path, "entry count does not match the shape");
  std::vector<cplx> e(rows * cols);
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = {re[k], im[k]};
  return ComplexMatrix(rows, cols, std::move(e));
}

std::string axis_name(Axis a) { return a == Axis::X ? "x" : a == Axis::Y ? "y" : "z"; }

Axis axis_from_name(const std::string& s, const std::string& path) {
  check_one_of<std::string>(s, {"x", "y", "z"}, path);
  return s == "x" ? Axis::X : s == "y" ? Axis::Y : Axis::Z;
}

}  // namespace

std::string checkpoint_json(const Classifier& model) {
  const auto& enc = model.encoding();
  json layers = json::array();
  for (const auto& l : enc.layers) {
    json gates = json::array();
    for (const auto& g : l.gates)
      gates.push_back({{"axis", axis_name(g.axis)}, {"qubit", g.qubit}, {"feature", g.feature}, {"scale", g.scale}});
    layers.push_back({{"eigenvalues", l.eigenvalues}, {"feature", l.feature_index}, {"scale", l.scale}, {"gates", gates}});
  }
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kToolVersion;
  j["encoding"] = {{"qubits", enc.qubits},
                   {"layers", layers},
                   {"slots", enc.variational_slots},
                   {"initial_state", enc.initial_state ? matrix_json(enc.initial_state->matrix()) : json(nullptr)}};
  json blocks = json::array();
  for (const auto& b : model.ansatz().blocks())
    blocks.push_back({{"slot", b.slot}, {"kind", to_string(b.kind)}, {"reps", b.reps}});
  j["ansatz"] = {{"qubits", model.ansatz().qubits()}, {"slot_count", model.ansatz().slot_count()}, {"blocks", blocks}};
  j["theta"] = model.parameters();
  j["povm"] = matrix_json(model.povm());
  if (const auto& s = model.smoothing()) {
    const auto kind = s->distribution.kind();
    if (kind == SmoothingDistribution::Kind::Custom)
      throw std::invalid_argument("checkpoint: custom smoothing distributions cannot be serialized");
    j["smoothing"] = {{"distribution", kind == SmoothingDistribution::Kind::Gaussian ? "gaussian" : "uniform"},
                      {"parameter", s->distribution.parameter()},
                      {"strategy", to_string(s->strategy)}};
  } else {
    j["smoothing"] = nullptr;
  }
  if (const auto& fe = model.frontend())
    j["frontend"] = {{"in_dim", fe->in_dim}, {"out_dim", fe->out_dim}, {"weight", fe->weight}, {"bias", fe->bias}};
  else
    j["frontend"] = nullptr;
  return j.dump(1);
}

Classifier classifier_from_checkpoint(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<checkpoint>", std::string("invalid JSON: ") + e.what());
  }
  Reader r(j, "");
  const auto format = r.require<std::string>("format");
  check(format == kCheckpointFormat, "format", "unsupported checkpoint format '" + format + "'");
  r.get<std::string>("version", "");

  const json* e = r.child("encoding");
  check(e != nullptr, "encoding", "required block is missing");
  Reader er(*e, "encoding");
  EncodingSpec spec;
  spec.qubits = er.require<std::size_t>("qubits");
  const json* layers = er.child("layers");
  check(layers && layers->is_array(), "encoding.layers", "expected an array");
  for (std::size_t i = 0; i < layers->size(); ++i) {
    const auto p = index_path("encoding.layers", i);
    Reader lr((*layers)[i], p);
    EncodingLayer l = EncodingLayer::diagonal(lr.require<std::vector<double>>("eigenvalues"),
                                              lr.require<std::size_t>("feature"), lr.get<double>("scale", 1.0));
    if (const json* gates = lr.child("gates")) {
      check(gates->is_array(), p + ".gates", "expected an array");
      for (std::size_t k = 0; k < gates->size(); ++k) {
        Reader gr((*gates)[k], index_path(p + ".gates", k));
        RotationGate g;
        g.axis = axis_from_name(gr.get<std::string>("axis", "z"), gr.at("axis"));
        g.qubit = gr.require<std::size_t>("qubit");
        g.feature = gr.require<std::size_t>("feature");
        g.scale = gr.require<double>("scale");
        gr.finish();
        l.gates.push_back(g);
      }
    }
    lr.finish();
    spec.layers.push_back(std::move(l));
  }
  spec.variational_slots = er.require<std::vector<std::size_t>>("slots");
  if (const json* rho = er.child("initial_state"); rho && !rho->is_null())
    spec.initial_state = DensityMatrix(matrix_from_json(*rho, "encoding.initial_state"));
  er.finish();

  const json* a = r.child("ansatz");
  check(a != nullptr, "ansatz", "required block is missing");
  Reader ar(*a, "ansatz");
  const auto aq = ar.require<std::size_t>("qubits");
  const auto slot_count = ar.require<std::size_t>("slot_count");
  std::vector<AnsatzBlock> blocks;
  const json* bl = ar.child("blocks");
  check(bl && bl->is_array(), "ansatz.blocks", "expected an array");
  for (std::size_t i = 0; i < bl->size(); ++i) {
    Reader br((*bl)[i], index_path("ansatz.blocks", i));
    AnsatzBlock b;
    b.slot = br.require<std::size_t>("slot");
    b.kind = ansatz_kind_from_string(br.require<std::string>("kind"));
    b.reps = br.require<std::size_t>("reps");
    br.finish();
    blocks.push_back(b);
  }
  ar.finish();

  const json* pj = r.child("povm");
  check(pj != nullptr, "povm", "required block is missing");
  Classifier model(std::move(spec), VariationalCircuit(aq, slot_count, blocks), matrix_from_json(*pj, "povm"));
  model.set_parameters(r.require<std::vector<double>>("theta"));

  if (const json* s = r.child("smoothing"); s && !s->is_null()) {
    Reader sr(*s, "smoothing");
    const auto dist = sr.require<std::string>("distribution");
    check_one_of<std::string>(dist, {"gaussian", "uniform"}, "smoothing.distribution");
    const auto param = sr.require<double>("parameter");
    const auto strategy = sr.require<std::string>("strategy");
    check_one_of<std::string>(strategy, {"exponential", "uniform"}, "smoothing.strategy");
    sr.finish();
    model.set_smoothing(ClassifierSmoothing{
        dist == "gaussian" ? SmoothingDistribution::gaussian(param) : SmoothingDistribution::uniform_interval(param),
        strategy == "exponential" ? SmoothingStrategy::Exponential : SmoothingStrategy::Uniform});
  }
  if (const json* f = r.child("frontend"); f && !f->is_null()) {
    Reader fr(*f, "frontend");
    LinearFrontEnd fe;
    fe.in_dim = fr.require<std::size_t>("in_dim");
    fe.out_dim = fr.require<std::size_t>("out_dim");
    fe.weight = fr.require<std::vector<double>>("weight");
    fe.bias = fr.require<std::vector<double>>("bias");
    fr.finish();
    model.set_frontend(std::move(fe));
  }
  r.finish();
  return model;
}

void save_checkpoint(const Classifier& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << checkpoint_json(model) << '\n';
}

Classifier load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return classifier_from_checkpoint(ss.str());
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns, const std::string& hash)
    : path_(path), out_(path), columns_(columns.size()) {
  if (!out_) throw std::runtime_error("cannot write " + path);
  out_ << "# qsmooth " << kToolVersion << " config " << hash << '\n';
  for (std::size_t k = 0; k < columns.size(); ++k) out_ << (k ? "," : "") << columns[k];
  out_ << '\n';
}

void CsvWriter::cell(const std::string& text) {
  if (filled_ == columns_) throw std::logic_error("csv " + path_ + ": too many cells in a row");
  out_ << (filled_ ? "," : "") << text;
  ++filled_;
}

CsvWriter& CsvWriter::operator<<(double v) {
  cell(format_double(v));
  return *this;
}
CsvWriter& CsvWriter::operator<<(const std::string& v) {
  cell(v);
  return *this;
}
CsvWriter& CsvWriter::operator<<(std::size_t v) {
  cell(std::to_string(v));
  return *this;
}
CsvWriter& CsvWriter::operator<<(int v) {
  cell(std::to_string(v));
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != columns_) throw std::logic_error("csv " + path_ + ": row has the wrong number of cells");
  out_ << '\n';
  filled_ = 0;
  if (!out_) throw std::runtime_error("write failed: " + path_);
}

}  // namespace qsmooth
