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

#include "qsmooth/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "qsmooth/parallel.hpp"

namespace qsmooth {

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("attack: epsilon must be >= 0");
  if (steps == 0) throw std::invalid_argument("attack: steps must be >= 1");
  if (restarts == 0) throw std::invalid_argument("attack: restarts must be >= 1");
  if (!(fd_step > 0.0)) throw std::invalid_argument("attack: fd_step must be > 0");
}

double AttackConfig::effective_step() const {
  return step_size > 0.0 ? step_size : 2.5 * epsilon / static_cast<double>(steps);
}

std::vector<double> finite_difference_gradient(const ProbabilityFn& f, std::span<const double> x, double h) {
  std::vector<double> p(x.begin(), x.end()), g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    p[k] = x[k] + h;
    const double plus = f(p);
    p[k] = x[k] - h;
    const double minus = f(p);
    p[k] = x[k];
    g[k] = (plus - minus) / (2.0 * h);
  }
  return g;
}

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Projects x onto the ball of radius eps around x0.
void project(std::vector<double>& x, std::span<const double> x0, double eps) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - x0[k]) * (x[k] - x0[k]);
  const double n = std::sqrt(s);
  if (n <= eps) return;
  const double f = eps / n;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = x0[k] + f * (x[k] - x0[k]);
}

std::vector<double> random_direction(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> d(dim);
  double s;
  do {
    for (auto& v : d) v = n(rng);
    s = norm2(d);
  } while (s == 0.0);
  for (auto& v : d) v /= s;
  return d;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace

AttackResult pgd_attack(const ProbabilityFn& f, std::span<const double> x0, int label, const AttackConfig& cfg,
                        const GradientFn& grad, const SemanticFn& semantic) {
  cfg.validate();
  AttackResult res;
  res.adversarial.assign(x0.begin(), x0.end());
  const int clean = predict_from_probability(f(x0));
  const int truth = semantic ? semantic(x0) : 0;
  if (semantic) res.semantic_valid = true;
  if (cfg.epsilon == 0.0) return res;

  auto flipped = [&](std::span<const double> x, double p) {
    if (predict_from_probability(p) == clean) return false;
    return !semantic || semantic(x) == truth;
  };
  const double step = cfg.effective_step();
  const std::size_t dim = x0.size();
  std::mt19937_64 rng(cfg.seed);
  double best_loss = -1.0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    std::vector<double> x(x0.begin(), x0.end());
    if (r > 0) {
      const auto d = random_direction(dim, rng);
      const double rad = cfg.epsilon * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      for (std::size_t k = 0; k < dim; ++k) x[k] += rad * d[k];
    }
    for (std::size_t s = 0; s < cfg.steps; ++s) {
      const double p = f(x);
      std::vector<double> g = grad ? grad(x) : finite_difference_gradient(f, x, cfg.fd_step);
      const double dl = bce_loss_derivative(p, label);
      for (auto& v : g) v *= dl;
      double gn = norm2(g);
      if (!(gn > 0.0) || !std::isfinite(gn)) {
        g = random_direction(dim, rng);
        gn = 1.0;
      }
      for (std::size_t k = 0; k < dim; ++k) x[k] += step * g[k] / gn;
      project(x, x0, cfg.epsilon);
      const double pn = f(x);
      const double loss = bce_loss(pn, label);
      res.loss_trace.push_back(loss);
      if (flipped(x, pn)) {
        res.success = true;
        res.adversarial = x;
        res.norm = distance(x, x0);
        if (semantic) res.semantic_valid = true;
        return res;
      }
      if (loss > best_loss) {
        best_loss = loss;
        res.adversarial = x;
        res.norm = distance(x, x0);
        if (semantic) res.semantic_valid = semantic(x) == truth;
      }
    }
  }
  return res;
}

AttackResult pgd_attack(const Classifier& model, std::span<const double> x0, int label, const AttackConfig& cfg,
                        const SemanticFn& semantic) {
  const bool smoothed = model.plan().has_value();
  ProbabilityFn f = [&model](std::span<const double> x) { return model.forward(x); };
  GradientFn g;
  if (model.frontend()) {
    g = [&model, smoothed, h = cfg.fd_step](std::span<const double> x) {
      const auto& fe = *model.frontend();
      const auto dz = model.feature_gradient(fe.forward(x), smoothed, h);
      std::vector<double> out(fe.in_dim, 0.0);
      for (std::size_t i = 0; i < fe.out_dim && i < dz.size(); ++i) {
        if (dz[i] == 0.0) continue;
        const double* row = fe.weight.data() + i * fe.in_dim;
        for (std::size_t j = 0; j < fe.in_dim; ++j) out[j] += dz[i] * row[j];
      }
      return out;
    };
  }
  return pgd_attack(f, x0, label, cfg, g, semantic);
}

int semantic_check_annular(std::span<const double> x) { return annular_label(x); }

AttackCurve attack_curve(const Classifier& model, const Dataset& data, std::span<const double> epsilons,
                         const AttackConfig& cfg, const SemanticFn& semantic, std::size_t threads) {
  data.validate();
  if (data.empty()) throw std::invalid_argument("attack_curve: empty dataset");
  if (epsilons.empty()) throw std::invalid_argument("attack_curve: empty epsilon grid");
  if (!std::is_sorted(epsilons.begin(), epsilons.end())) throw std::invalid_argument("attack_curve: epsilons must ascend");

  const std::size_t n = data.size(), m = epsilons.size();
  // outcome[i][k]: attack on point i succeeded at epsilons[k] or earlier
  std::vector<std::vector<AttackRecord>> per_point(n);
  std::vector<int> correct(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& x = data.points[i];
    correct[i] = model.predict(x) == data.labels[i] ? 1 : 0;
    bool broken = false;
    AttackRecord last;
    for (std::size_t k = 0; k < m; ++k) {
      AttackRecord rec;
      rec.point_id = i;
      rec.epsilon = epsilons[k];
      if (broken) {
        rec.success = true;
        rec.norm = last.norm;
        rec.semantic_valid = last.semantic_valid;
      } else {
        AttackConfig c = cfg;
        c.epsilon = epsilons[k];
        c.seed = derive_seed(cfg.seed, i * m + k);
        const auto r = pgd_attack(model, x, data.labels[i], c, semantic);
        rec.success = r.success;
        rec.norm = r.norm;
        rec.semantic_valid = r.semantic_valid;
        if (r.success) {
          broken = true;
          last = rec;
        }
      }
      per_point[i].push_back(rec);
    }
  });

  AttackCurve curve;
  for (std::size_t k = 0; k < m; ++k) {
    AttackCurvePoint pt;
    pt.epsilon = epsilons[k];
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = per_point[i][k];
      if (rec.success) ++pt.successes;
      if (correct[i] && !rec.success) ++ok;
    }
    pt.accuracy = static_cast<double>(ok) / static_cast<double>(n);
    curve.points.push_back(pt);
  }
  for (const auto& recs : per_point)
    for (const auto& r : recs) curve.records.push_back(r);
  return curve;
}

}  // namespace qsmooth
