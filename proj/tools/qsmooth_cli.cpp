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

// qsmooth: train, certify, attack, kernel and selftest subcommands.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qsmooth/experiment.hpp"
#include "qsmooth/selftest.hpp"

namespace fs = std::filesystem;
using namespace qsmooth;

namespace {

constexpr int kExitOk = 0, kExitUsage = 1, kExitRuntime = 2, kExitSelftest = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config, checkpoint, out;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  bool flip_phi = false;
};

std::size_t thread_count(const Options& o) {
  if (o.threads) return std::max<std::size_t>(1, *o.threads);
  if (const char* env = std::getenv("QSMOOTH_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("QSMOOTH_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

RunConfig load(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  RunConfig cfg = load_run_config(o.config);
  if (o.seed) cfg.override_seed(*o.seed);
  return cfg;
}

fs::path out_dir(const Options& o, const RunConfig& cfg) {
  const fs::path dir = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

fs::path checkpoint_path(const Options& o, const fs::path& dir) {
  return o.checkpoint.empty() ? dir / "checkpoint.json" : fs::path(o.checkpoint);
}

int cmd_train(const Options& o) {
  const RunConfig cfg = load(o);
  const std::size_t threads = thread_count(o);
  const fs::path dir = out_dir(o, cfg);
  const auto data = load_data(cfg);
  const auto r = run_training(cfg, data, threads);
  const fs::path ckpt = checkpoint_path(o, dir);
  save_checkpoint(r.model, ckpt.string());

  const std::string hash = config_hash(cfg);
  CsvWriter loss((dir / "loss.csv").string(), {"epoch", "loss"}, hash);
  for (std::size_t e = 0; e < r.result.loss.size(); ++e) {
    loss << e + 1 << r.result.loss[e];
    loss.end_row();
  }
  std::cout << "checkpoint " << ckpt.string() << "\n"
            << "train accuracy " << r.train_accuracy << "\n"
            << "test accuracy " << r.test_accuracy << "\n";
  if (r.model.smoothing()) std::cout << "base test accuracy " << r.clean_test_accuracy << "\n";
  return kExitOk;
}

int cmd_certify(const Options& o) {
  const RunConfig cfg = load(o);
  const std::size_t threads = thread_count(o);
  const fs::path dir = out_dir(o, cfg);
  const Classifier model = load_checkpoint(checkpoint_path(o, dir).string());
  if (!model.smoothing())
    throw UsageError(
        "checkpoint has no smoothing; set \"smoothing\": {\"enabled\": true, ...} in the config and retrain");
  const auto data = load_data(cfg);
  const auto outcomes = run_certification(model, data.test, cfg, threads);

  const std::string hash = config_hash(cfg);
  CsvWriter certs((dir / "certificates.csv").string(),
                  {"point_id", "label", "prediction", "p_lower", "radius", "confidence", "strategy", "mode", "sigma"},
                  hash);
  CsvWriter curve((dir / "certified_curve.csv").string(),
                  {"sigma", "radius", "certified_ratio", "certified_accuracy"}, hash);
  for (const auto& oc : outcomes) {
    for (const auto& c : oc.certificates) {
      certs << c.point_id << c.label << c.prediction << c.p_lower << c.radius << c.confidence
            << to_string(c.strategy) << to_string(c.mode) << oc.sigma;
      certs.end_row();
    }
    for (const auto& p : oc.curve) {
      curve << oc.sigma << p.radius << p.certified_ratio << p.certified_accuracy;
      curve.end_row();
    }
    std::cout << "sigma " << oc.sigma << " area " << oc.area << "\n";
  }
  return kExitOk;
}

int cmd_attack(const Options& o) {
  const RunConfig cfg = load(o);
  if (cfg.attack.epsilons.empty()) throw UsageError("attack.epsilons: grid is empty");
  const std::size_t threads = thread_count(o);
  const fs::path dir = out_dir(o, cfg);
  const Classifier model = load_checkpoint(checkpoint_path(o, dir).string());
  const auto data = load_data(cfg);
  const auto r = run_attack(model, data.test, cfg, threads);

  const std::string hash = config_hash(cfg);
  CsvWriter rec((dir / "attack_records.csv").string(),
                {"point_id", "epsilon", "success", "achieved_norm", "semantic_valid"}, hash);
  for (const auto& a : r.curve.records) {
    rec << a.point_id << a.epsilon << static_cast<int>(a.success) << a.norm
        << (a.semantic_valid ? std::string(*a.semantic_valid ? "1" : "0") : std::string());
    rec.end_row();
  }
  std::vector<std::string> cols{"epsilon", "attack_accuracy", "successes"};
  if (r.certified) cols.insert(cols.end(), {"certified_accuracy", "gap"});
  CsvWriter curve((dir / "attack_curve.csv").string(), cols, hash);
  for (std::size_t i = 0; i < r.curve.points.size(); ++i) {
    const auto& p = r.curve.points[i];
    curve << p.epsilon << p.accuracy << p.successes;
    if (r.certified) {
      const double c = (*r.certified)[i].certified_accuracy;
      curve << c << p.accuracy - c;
    }
    curve.end_row();
  }
  return kExitOk;
}

int cmd_kernel(const Options& o) {
  const RunConfig cfg = load(o);
  const std::size_t threads = thread_count(o);
  const fs::path dir = out_dir(o, cfg);
  const auto& k = cfg.kernel;
  const auto rows = kernel_grid(k);
  const std::string hash = config_hash(cfg);

  std::vector<std::string> cols{"x"};
  if (k.dims == 2) cols.push_back("y");
  cols.insert(cols.end(), {"k_unsmoothed", "k_exponential", "k_uniform"});
  CsvWriter grid((dir / "kernel_grid.csv").string(), cols, hash);
  for (const auto& r : rows) {
    for (double v : r.point) grid << v;
    grid << r.unsmoothed << r.exponential << r.uniform;
    grid.end_row();
  }
  std::cout << "l2 exponential " << kernel_l2_deviation(rows, SmoothingStrategy::Exponential) << "\n"
            << "l2 uniform " << kernel_l2_deviation(rows, SmoothingStrategy::Uniform) << "\n";

  if (cfg.dataset.kind == "annular") {
    const auto data = load_data(cfg);
    CsvWriter ridge((dir / "kernel_ridge.csv").string(), {"kernel", "train_accuracy", "test_accuracy"}, hash);
    for (const auto& r : kernel_ridge_study(k, data, threads)) {
      ridge << r.kernel << r.train_accuracy << r.test_accuracy;
      ridge.end_row();
      std::cout << "ridge " << r.kernel << " train " << r.train_accuracy << " test " << r.test_accuracy << "\n";
    }
  }
  return kExitOk;
}

int cmd_selftest(const Options& o) {
  SelftestOptions so;
  so.seed = o.seed.value_or(0);
  so.threads = thread_count(o);
  so.flip_phi_sign = o.flip_phi;
  const auto results = run_selftest(so);
  const std::string report = selftest_report_json(results);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream((fs::path(o.out) / "selftest.json").string()) << report << "\n";
  }
  std::cout << report << "\n";
  for (const auto& r : results)
    if (!r.pass) return kExitSelftest;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smoothed quantum classifiers: training, certification, attacks and kernels"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool config, bool checkpoint) {
    if (config) sub->add_option("--config", o.config, "Run config (JSON)")->required();
    if (checkpoint) sub->add_option("--checkpoint", o.checkpoint, "Checkpoint path (default <out>/checkpoint.json)");
    sub->add_option("--out", o.out, "Output directory (default: config output_dir)");
    sub->add_option("--threads", o.threads, "Worker threads (fallback: QSMOOTH_THREADS, then 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "Run seed; replaces the config seed and all component seeds");
  };
  auto* train = app.add_subcommand("train", "Train a classifier and write a checkpoint plus loss.csv");
  add_common(train, true, true);
  auto* certify = app.add_subcommand("certify", "Certify the test split; writes certificates.csv and certified_curve.csv");
  add_common(certify, true, true);
  auto* attack = app.add_subcommand("attack", "PGD attacks on the test split; writes attack_records.csv and attack_curve.csv");
  add_common(attack, true, true);
  auto* kernel = app.add_subcommand("kernel", "Export kernel_grid.csv (and kernel_ridge.csv for annular data)");
  add_common(kernel, true, false);
  auto* selftest = app.add_subcommand("selftest", "Run the invariant checks and print a JSON report");
  add_common(selftest, false, false);
  selftest->add_flag("--inject-phi-sign-flip", o.flip_phi, "Evaluate the normal CDF at -x (mutation smoke)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(o);
    if (*certify) return cmd_certify(o);
    if (*attack) return cmd_attack(o);
    if (*kernel) return cmd_kernel(o);
    return cmd_selftest(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
