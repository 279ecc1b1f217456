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

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsmooth/attack.hpp"
#include "qsmooth/certify.hpp"
#include "qsmooth/model.hpp"

namespace qsmooth {

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr const char* kCheckpointFormat = "qsmooth-checkpoint/1";

/// Tags for RunConfig::component_seed.
namespace seed_tag {
inline constexpr std::uint64_t kDataset = 1, kInit = 2, kFrontEnd = 3, kTrain = 4, kCertify = 5, kAttack = 6;
}

/// Schema violation; `path` names the offending field, e.g. "model.qubits".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct DatasetConfig {
  /// two_moons | annular | mnist
  std::string kind = "two_moons";
  std::size_t n = 250;
  double noise = 0.1;
  double train_fraction = 0.8;
  std::optional<std::uint64_t> seed;
  // mnist only
  std::string path = "data/mnist01";
  int digit_a = 0, digit_b = 1;
  std::size_t train_per_class = 100, test_per_class = 100;
};

/// One entry of the layer plan. `rz_block` expands into one single-gate
/// layer per listed feature, gate k on qubit first_qubit + k.
struct LayerConfig {
  /// exponential | rz | rz_block | diagonal
  std::string type = "exponential";
  std::size_t feature = 0;
  std::vector<std::size_t> features;
  std::size_t first_qubit = 0;
  /// Width of an exponential layer; 0 means the whole register.
  std::size_t width = 0;
  double scale = 1.0;
  std::vector<std::pair<std::size_t, double>> gates;
  std::vector<double> eigenvalues;
};

struct FrontEndConfig {
  std::size_t in_dim = 0, out_dim = 0;
  double scale = 1.0;
  std::optional<std::uint64_t> seed;
};

struct ModelConfig {
  std::size_t qubits = 0;
  /// zero | uniform
  std::string initial_state = "zero";
  std::vector<LayerConfig> layers;
  /// Slot k sits before layer entry k (k = entry count: after the last).
  std::vector<AnsatzBlock> ansatz;
  /// parity | qubit
  std::string povm = "qubit";
  std::size_t povm_qubit = 0;
  std::optional<FrontEndConfig> frontend;
  double init_scale = M_PI;
  std::optional<std::uint64_t> init_seed;
};

struct SmoothingConfig {
  bool enabled = false;
  /// gaussian | uniform
  std::string distribution = "gaussian";
  /// Standard deviation (gaussian) or interval width (uniform).
  double sigma = 0.5;
  SmoothingStrategy strategy = SmoothingStrategy::Exponential;
};

struct TrainBlock {
  TrainConfig config;
  std::optional<std::uint64_t> seed;
};

struct CertifyBlock {
  CertifyMode mode = CertifyMode::Exact;
  std::size_t shots = 10000;
  double alpha = 0.05;
  std::vector<double> radii;
  /// Empty: certify at the checkpoint's sigma only.
  std::vector<double> sigmas;
  UniformRadiusFormula uniform_formula = UniformRadiusFormula::Conservative;
  std::optional<std::uint64_t> seed;
};

struct AttackBlock {
  std::vector<double> epsilons;
  std::size_t steps = 100;
  std::size_t restarts = 1;
  double step_size = -1.0;
  double fd_step = 1e-4;
  /// none | annular
  std::string semantic = "none";
  std::optional<std::uint64_t> seed;
};

struct KernelBlock {
  std::size_t qubits = 4;
  double sigma = 1.5;
  double grid_min = -M_PI, grid_max = M_PI;
  std::size_t grid_points = 201;
  /// 1 or 2; a 2-D grid varies both coordinates of the second point.
  std::size_t dims = 1;
  double ridge = 1e-3;
};

struct RunConfig {
  std::string experiment = "run";
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig model;
  SmoothingConfig smoothing;
  TrainBlock train;
  CertifyBlock certify;
  AttackBlock attack;
  KernelBlock kernel;
  std::string output_dir = "out";

  /// Effective seed of a component: the explicit one, else derived from `seed`.
  std::uint64_t component_seed(const std::optional<std::uint64_t>& explicit_seed, std::uint64_t tag) const;
  /// Replaces the run seed and drops every explicit component seed.
  void override_seed(std::uint64_t s);
};

/// Parses and validates; unknown fields and bad values raise ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
/// Canonical JSON of the parsed config (defaults filled in).
std::string dump_run_config(const RunConfig& cfg);
/// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Builds the encoding described by the layer plan; the slot of every ansatz
/// block is remapped from plan entries to expanded layers.
EncodingSpec build_encoding(const ModelConfig& m, std::vector<std::size_t>* entry_to_layer = nullptr);
Classifier build_classifier(const RunConfig& cfg);
std::optional<ClassifierSmoothing> build_smoothing(const SmoothingConfig& s);

/// Checkpoints: everything needed to rebuild a classifier without the config.
std::string checkpoint_json(const Classifier& model);
Classifier classifier_from_checkpoint(const std::string& json_text);
void save_checkpoint(const Classifier& model, const std::string& path);
Classifier load_checkpoint(const std::string& path);

/// CSV with a leading "# qsmooth <version> config <hash>" line then the header row.
/// Doubles are written in shortest round-trip form.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns, const std::string& hash);
  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(const std::string& v);
  CsvWriter& operator<<(std::size_t v);
  CsvWriter& operator<<(int v);
  /// Throws std::logic_error when the row has the wrong number of cells.
  void end_row();

 private:
  void cell(const std::string& text);
  std::string path_;
  std::ofstream out_;
  std::size_t columns_ = 0, filled_ = 0;
};

std::string format_double(double v);

}  // namespace qsmooth
