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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qsmooth {

/// Labeled points with binary labels.
struct Dataset {
  std::vector<std::vector<double>> points;
  std::vector<int> labels;
  std::string split = "all";
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
  bool empty() const { return points.empty(); }
  /// Throws std::invalid_argument on ragged points, length mismatch or non-binary labels.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Two interleaving half circles: class 0 at (cos t, sin t), class 1 at
/// (1 - cos t, 0.5 - sin t), t ~ U[0, pi], plus N(0, noise^2) per coordinate.
/// Class 0 gets ceil(n / 2) points; points are interleaved by class.
Dataset two_moons(std::size_t n, double noise, std::uint64_t seed);

/// 1 - 1[0.3 < |x| <= 0.8]
int annular_label(std::span<const double> x);
/// Uniform points in [-1, 1]^2 labeled by annular_label.
Dataset annular(std::size_t n, std::uint64_t seed);

/// Seeded shuffle then partition; the train part gets round(fraction * n) points.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// IDX readers/writers (big-endian; magic 0x00000803 for images, 0x00000801 for labels).
IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels);

/// Balanced two-digit subset; digit_a -> label 0, digit_b -> label 1, pixels scaled to [0, 1].
/// Takes up to per_class_cap images of each digit after a seeded shuffle.
Dataset mnist_binary(const std::string& image_path, const std::string& label_path, int digit_a, int digit_b,
                     std::size_t per_class_cap, std::uint64_t seed);

/// Columns x0..x{d-1},label with a header row.
void write_csv(const Dataset& ds, const std::string& path);

}  // namespace qsmooth
