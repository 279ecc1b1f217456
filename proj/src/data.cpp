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

#include "qsmooth/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace qsmooth {

void Dataset::validate() const {
  if (points.size() != labels.size()) throw std::invalid_argument("dataset: points and labels differ in length");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim()) throw std::invalid_argument("dataset: ragged points");
    if (labels[i] != 0 && labels[i] != 1) {
      std::ostringstream os;
      os << "dataset: label " << labels[i] << " at index " << i << " is not binary";
      throw std::invalid_argument(os.str());
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.split = split;
  out.seed = seed;
  for (std::size_t i : indices) {
    out.points.push_back(points.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

Dataset two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("two_moons: need at least two points");
  if (!(noise >= 0.0)) throw std::invalid_argument("two_moons: noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.0, M_PI);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset ds;
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = ut(rng);
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    if (noise > 0.0) {
      x += noise * nd(rng);
      y += noise * nd(rng);
    }
    ds.points.push_back({x, y});
    ds.labels.push_back(label);
  }
  return ds;
}

int annular_label(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  const double r = std::sqrt(s);
  return (r > 0.3 && r <= 0.8) ? 0 : 1;
}

Dataset annular(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("annular: need at least one point");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset ds;
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    ds.points.push_back({a, b});
    ds.labels.push_back(annular_label(ds.points.back()));
  }
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("split: fraction must lie in (0, 1)");
  const std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.size())));
  if (n_train == 0 || n_train == ds.size()) {
    std::ostringstream os;
    os << "split: fraction " << train_fraction << " of " << ds.size() << " points leaves an empty side";
    throw std::invalid_argument(os.str());
  }
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  Dataset train = ds.subset(std::span(idx).first(n_train));
  Dataset test = ds.subset(std::span(idx).subspan(n_train));
  train.split = "train";
  test.split = "test";
  return {std::move(train), std::move(test)};
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("idx: truncated header in " + path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

void check_magic(std::uint32_t magic, std::uint32_t expected, const std::string& path) {
  if (magic != expected) {
    std::ostringstream os;
    os << "idx: bad magic 0x" << std::hex << magic << " in " << path << " (expected 0x" << expected << ")";
    throw std::runtime_error(os.str());
  }
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
  auto in = open_binary(path);
  check_magic(read_be32(in, path), 0x00000803, path);
  IdxImages img;
  img.count = read_be32(in, path);
  img.rows = read_be32(in, path);
  img.cols = read_be32(in, path);
  img.pixels.resize(img.count * img.rows * img.cols);
  if (!in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size())))
    throw std::runtime_error("idx: truncated pixel data in " + path);
  return img;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  auto in = open_binary(path);
  check_magic(read_be32(in, path), 0x00000801, path);
  std::vector<std::uint8_t> labels(read_be32(in, path));
  if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size())))
    throw std::runtime_error("idx: truncated label data in " + path);
  return labels;
}

void write_idx_images(const std::string& path, const IdxImages& images) {
  if (images.pixels.size() != images.count * images.rows * images.cols)
    throw std::invalid_argument("write_idx_images: pixel count does not match shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_be32(out, 0x00000803);
  write_be32(out, static_cast<std::uint32_t>(images.count));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()), static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_be32(out, 0x00000801);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset mnist_binary(const std::string& image_path, const std::string& label_path, int digit_a, int digit_b,
                     std::size_t per_class_cap, std::uint64_t seed) {
  const IdxImages img = read_idx_images(image_path);
  const auto labels = read_idx_labels(label_path);
  if (labels.size() != img.count) {
    std::ostringstream os;
    os << "mnist: " << img.count << " images but " << labels.size() << " labels";
    throw std::runtime_error(os.str());
  }
  std::vector<std::size_t> idx(img.count);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t pix = img.rows * img.cols;
  std::size_t taken[2] = {0, 0};
  Dataset ds;
  ds.seed = seed;
  for (std::size_t i : idx) {
    const int digit = labels[i];
    const int cls = digit == digit_a ? 0 : digit == digit_b ? 1 : -1;
    if (cls < 0 || taken[cls] >= per_class_cap) continue;
    ++taken[cls];
    std::vector<double> p(pix);
    for (std::size_t k = 0; k < pix; ++k) p[k] = img.pixels[i * pix + k] / 255.0;
    ds.points.push_back(std::move(p));
    ds.labels.push_back(cls);
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (std::size_t j = 0; j < ds.dim(); ++j) out << 'x' << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.points[i]) out << v << ',';
    out << ds.labels[i] << '\n';
  }
}

}  // namespace qsmooth
