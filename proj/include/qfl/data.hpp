//
// Copyright 2026 The qfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Datasets: MNIST IDX ingestion, label-skew partitioning and synthetic
// problem generators.

#ifndef QFL_DATA_HPP_
#define QFL_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qfl/errors.hpp"
#include "qfl/qnn.hpp"
#include "qfl/random.hpp"

namespace qfl {

struct Dataset {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  int feature_dim = 0;
  int n_classes = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  void Add(std::vector<double> x, int y) {
    features.push_back(std::move(x));
    labels.push_back(y);
  }

  // Subset in the order given by `indices`.
  Dataset Select(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.feature_dim = feature_dim;
    out.n_classes = n_classes;
    for (std::size_t i : indices) out.Add(features[i], labels[i]);
    return out;
  }

  // Regression view with the class index as target. Intended for binary
  // tasks, where targets are {0, 1}.
  Batch ToBatch() const {
    Batch b;
    b.inputs = features;
    b.labels.assign(labels.begin(), labels.end());
    return b;
  }
};

// ---------------------------------------------------------------------------
// IDX files.

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Pixel byte -> angle in [0, pi].
inline double PixelToAngle(std::uint8_t pixel) {
  return static_cast<double>(pixel) * std::numbers::pi / 255.0;
}

namespace internal {

inline std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline std::uint32_t ReadBigEndian32(const std::vector<std::uint8_t>& bytes,
                                     std::size_t offset,
                                     const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path + ": truncated header at byte offset " +
                      std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

inline void AppendBigEndian32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace internal

// Block-average grid for downsampling. {0, 0} keeps every pixel.
struct Downsample {
  int rows = 0;
  int cols = 0;
};

// Loads an IDX image/label file pair. Pixels are rescaled from [0, 255] to
// [0, pi] and optionally block-averaged onto a rows x cols grid, which must
// divide the image size.
inline Dataset LoadMnistIdx(const std::string& images_path,
                            const std::string& labels_path,
                            Downsample grid = {}) {
  using internal::ReadBigEndian32;
  const auto img = internal::ReadFileBytes(images_path);
  const auto lab = internal::ReadFileBytes(labels_path);

  const std::uint32_t img_magic = ReadBigEndian32(img, 0, images_path);
  if (img_magic != kIdxImagesMagic) {
    throw FormatError(images_path + ": bad magic at byte offset 0: expected " +
                      "0x00000803, got " + std::to_string(img_magic));
  }
  const std::uint32_t lab_magic = ReadBigEndian32(lab, 0, labels_path);
  if (lab_magic != kIdxLabelsMagic) {
    throw FormatError(labels_path + ": bad magic at byte offset 0: expected " +
                      "0x00000801, got " + std::to_string(lab_magic));
  }
  const std::uint32_t n_images = ReadBigEndian32(img, 4, images_path);
  const std::uint32_t rows = ReadBigEndian32(img, 8, images_path);
  const std::uint32_t cols = ReadBigEndian32(img, 12, images_path);
  const std::uint32_t n_labels = ReadBigEndian32(lab, 4, labels_path);
  if (n_images != n_labels) {
    throw FormatError(labels_path + ": label count " +
                      std::to_string(n_labels) + " at byte offset 4 does " +
                      "not match image count " + std::to_string(n_images));
  }
  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t img_need = 16 + pixels * n_images;
  if (img.size() < img_need) {
    throw FormatError(images_path + ": truncated at byte offset " +
                      std::to_string(img.size()) + ", expected " +
                      std::to_string(img_need) + " bytes");
  }
  if (lab.size() < 8 + std::size_t{n_labels}) {
    throw FormatError(labels_path + ": truncated at byte offset " +
                      std::to_string(lab.size()) + ", expected " +
                      std::to_string(8 + std::size_t{n_labels}) + " bytes");
  }

  const bool down = grid.rows > 0 && grid.cols > 0;
  if (down && (rows % grid.rows != 0 || cols % grid.cols != 0)) {
    throw ConfigError("grid", "downsample grid " + std::to_string(grid.rows) +
                                  "x" + std::to_string(grid.cols) +
                                  " does not divide " + std::to_string(rows) +
                                  "x" + std::to_string(cols));
  }

  Dataset ds;
  ds.feature_dim = down ? grid.rows * grid.cols : static_cast<int>(pixels);
  int max_label = -1;
  for (std::uint32_t n = 0; n < n_images; ++n) {
    const std::uint8_t* px = img.data() + 16 + n * pixels;
    std::vector<double> x;
    if (!down) {
      x.reserve(pixels);
      for (std::size_t i = 0; i < pixels; ++i) x.push_back(PixelToAngle(px[i]));
    } else {
      const std::uint32_t bh = rows / grid.rows;
      const std::uint32_t bw = cols / grid.cols;
      x.assign(ds.feature_dim, 0.0);
      for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
          x[(r / bh) * grid.cols + c / bw] += PixelToAngle(px[r * cols + c]);
        }
      }
      for (double& v : x) v /= static_cast<double>(bh * bw);
    }
    const int y = lab[8 + n];
    max_label = std::max(max_label, y);
    ds.Add(std::move(x), y);
  }
  ds.n_classes = max_label + 1;
  return ds;
}

// Writes `images` (n x rows*cols bytes) and labels as an IDX file pair.
inline void WriteMnistIdx(const std::string& images_path,
                          const std::string& labels_path,
                          const std::vector<std::vector<std::uint8_t>>& images,
                          const std::vector<std::uint8_t>& labels, int rows,
                          int cols) {
  if (images.size() != labels.size()) {
    throw StructuralError("image and label counts differ");
  }
  std::vector<std::uint8_t> img;
  internal::AppendBigEndian32(img, kIdxImagesMagic);
  internal::AppendBigEndian32(img, static_cast<std::uint32_t>(images.size()));
  internal::AppendBigEndian32(img, static_cast<std::uint32_t>(rows));
  internal::AppendBigEndian32(img, static_cast<std::uint32_t>(cols));
  for (const auto& im : images) {
    if (im.size() != static_cast<std::size_t>(rows * cols)) {
      throw StructuralError("image has wrong pixel count");
    }
    img.insert(img.end(), im.begin(), im.end());
  }
  std::vector<std::uint8_t> lab;
  internal::AppendBigEndian32(lab, kIdxLabelsMagic);
  internal::AppendBigEndian32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.insert(lab.end(), labels.begin(), labels.end());

  std::ofstream oi(images_path, std::ios::binary);
  oi.write(reinterpret_cast<const char*>(img.data()),
           static_cast<std::streamsize>(img.size()));
  std::ofstream ol(labels_path, std::ios::binary);
  ol.write(reinterpret_cast<const char*>(lab.data()),
           static_cast<std::streamsize>(lab.size()));
  if (!oi || !ol) throw FormatError("failed writing IDX files");
}

// Keeps samples whose label is in `classes`, relabelled by position in
// `classes` (so {0, 1} -> {0, 1}, {3, 8} -> {0, 1}).
inline Dataset SelectClasses(const Dataset& ds, const std::vector<int>& classes) {
  Dataset out;
  out.feature_dim = ds.feature_dim;
  out.n_classes = static_cast<int>(classes.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto it = std::find(classes.begin(), classes.end(), ds.labels[i]);
    if (it != classes.end()) {
      out.Add(ds.features[i], static_cast<int>(it - classes.begin()));
    }
  }
  return out;
}

// Per-feature min-max rescale onto [0, pi]. Constant columns map to 0.
// Idempotent and order-preserving within each feature.
inline Dataset MinMaxToAngles(const Dataset& ds) {
  Dataset out = ds;
  for (int j = 0; j < ds.feature_dim; ++j) {
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& x : ds.features) {
      lo = std::min(lo, x[j]);
      hi = std::max(hi, x[j]);
    }
    for (auto& x : out.features) {
      x[j] = hi > lo ? (x[j] - lo) / (hi - lo) * std::numbers::pi : 0.0;
    }
  }
  return out;
}

// Seeded shuffle followed by a split into (first `n_first`, next `n_second`)
// samples.
inline std::pair<Dataset, Dataset> ShuffleSplit(const Dataset& ds,
                                                std::size_t n_first,
                                                std::size_t n_second,
                                                RandomStream& stream) {
  if (n_first + n_second > ds.size()) {
    throw ConfigError("train_samples", "requested " +
                                           std::to_string(n_first + n_second) +
                                           " samples, dataset has " +
                                           std::to_string(ds.size()));
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), stream);
  std::vector<std::size_t> a(order.begin(), order.begin() + n_first);
  std::vector<std::size_t> b(order.begin() + n_first,
                             order.begin() + n_first + n_second);
  return {ds.Select(a), ds.Select(b)};
}

// Non-IID label-skew partition. Classes are shuffled and dealt round-robin,
// classes_per_client at a time, to clients 0..U-1; every class therefore
// goes to at least one client when U * classes_per_client >= n_classes.
// Each class's samples are split evenly (sizes differ by at most one) among
// the clients that hold it. The partition is disjoint and covering.
inline std::vector<Dataset> PartitionLabelSkew(const Dataset& ds, int clients,
                                               int classes_per_client,
                                               RandomStream& stream) {
  const int n_classes = ds.n_classes;
  if (clients < 1) throw ConfigError("clients", "must be >= 1");
  if (classes_per_client < 1 || classes_per_client > n_classes) {
    throw ConfigError("classes_per_client",
                      "must lie in [1, " + std::to_string(n_classes) + "]");
  }
  if (clients * classes_per_client < n_classes) {
    throw ConfigError("classes_per_client",
                      "too few client slots to cover " +
                          std::to_string(n_classes) + " classes");
  }
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int y = ds.labels[i];
    if (y < 0 || y >= n_classes) {
      throw InputError("label " + std::to_string(y) + " out of range");
    }
    by_class[y].push_back(i);
  }
  for (int c = 0; c < n_classes; ++c) {
    if (by_class[c].empty()) {
      throw ConfigError("classes", "class " + std::to_string(c) +
                                       " has no samples");
    }
  }

  std::vector<int> order(n_classes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), stream);

  std::vector<std::vector<int>> holders(n_classes);
  std::size_t cursor = 0;
  for (int u = 0; u < clients; ++u) {
    for (int j = 0; j < classes_per_client; ++j) {
      holders[order[cursor % n_classes]].push_back(u);
      ++cursor;
    }
  }

  std::vector<std::vector<std::size_t>> assigned(clients);
  for (int c = 0; c < n_classes; ++c) {
    auto idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), stream);
    const std::size_t h = holders[c].size();
    if (idx.size() < h) {
      throw ConfigError("classes_per_client",
                        "class " + std::to_string(c) + " has " +
                            std::to_string(idx.size()) + " samples for " +
                            std::to_string(h) + " clients");
    }
    const std::size_t base = idx.size() / h;
    const std::size_t extra = idx.size() % h;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < h; ++k) {
      const std::size_t take = base + (k < extra ? 1 : 0);
      auto& dst = assigned[holders[c][k]];
      dst.insert(dst.end(), idx.begin() + pos, idx.begin() + pos + take);
      pos += take;
    }
  }

  std::vector<Dataset> parts;
  parts.reserve(clients);
  for (auto& a : assigned) {
    std::sort(a.begin(), a.end());
    parts.push_back(ds.Select(a));
  }
  return parts;
}

// Binary task on `dim` angle features drawn uniformly from [0, pi]; the
// label is 1 when cos(x_0) + cos(x_1) < 0, i.e. when the first two encoded
// qubits lean towards |1>.
inline Dataset MakeSyntheticBinaryTask(std::size_t n_samples, int dim,
                                       RandomStream& stream) {
  if (dim < 2) throw ConfigError("features", "synthetic task needs >= 2");
  std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
  Dataset ds;
  ds.feature_dim = dim;
  ds.n_classes = 2;
  for (std::size_t i = 0; i < n_samples; ++i) {
    std::vector<double> x(dim);
    for (double& v : x) v = u(stream);
    ds.Add(x, std::cos(x[0]) + std::cos(x[1]) < 0.0 ? 1 : 0);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic strongly convex federation.

// Client u holds f_u(theta) = 1/2 a_u ||theta - c_u||^2 with a_u in
// [mu, smoothness]. The global objective is the client average.
struct QuadraticProblem {
  int dim = 1;
  double mu = 1.0;
  double smoothness = 1.0;
  std::vector<double> curvature;
  std::vector<std::vector<double>> optimum;

  int clients() const { return static_cast<int>(curvature.size()); }

  double ClientLoss(int u, std::span<const double> theta) const {
    double s = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double d = theta[j] - optimum[u][j];
      s += d * d;
    }
    return 0.5 * curvature[u] * s;
  }

  std::vector<double> ClientGradient(int u, std::span<const double> theta) const {
    std::vector<double> g(dim);
    for (int j = 0; j < dim; ++j) g[j] = curvature[u] * (theta[j] - optimum[u][j]);
    return g;
  }

  double GlobalLoss(std::span<const double> theta) const {
    double s = 0.0;
    for (int u = 0; u < clients(); ++u) s += ClientLoss(u, theta);
    return s / clients();
  }

  std::vector<double> GlobalGradient(std::span<const double> theta) const {
    std::vector<double> g(dim, 0.0);
    for (int u = 0; u < clients(); ++u) {
      const auto gu = ClientGradient(u, theta);
      for (int j = 0; j < dim; ++j) g[j] += gu[j];
    }
    for (double& v : g) v /= clients();
    return g;
  }

  // theta* = sum_u a_u c_u / sum_u a_u.
  std::vector<double> GlobalOptimum() const {
    std::vector<double> t(dim, 0.0);
    double wsum = 0.0;
    for (int u = 0; u < clients(); ++u) {
      wsum += curvature[u];
      for (int j = 0; j < dim; ++j) t[j] += curvature[u] * optimum[u][j];
    }
    for (double& v : t) v /= wsum;
    return t;
  }

  // sigma*^2 = (1/U) sum_u ||grad f_u(theta*)||^2.
  double SigmaStarSq() const {
    const auto ts = GlobalOptimum();
    double s = 0.0;
    for (int u = 0; u < clients(); ++u) {
      for (double g : ClientGradient(u, ts)) s += g * g;
    }
    return s / clients();
  }

  // (1/U) sum_u ||grad f_u(theta) - grad f(theta)||^2.
  double GradientDissimilarity(std::span<const double> theta) const {
    const auto g = GlobalGradient(theta);
    double s = 0.0;
    for (int u = 0; u < clients(); ++u) {
      const auto gu = ClientGradient(u, theta);
      for (int j = 0; j < dim; ++j) s += (gu[j] - g[j]) * (gu[j] - g[j]);
    }
    return s / clients();
  }

  nlohmann::json ToJson() const {
    return {{"dim", dim},
            {"mu", mu},
            {"smoothness", smoothness},
            {"curvature", curvature},
            {"optimum", optimum}};
  }

  static QuadraticProblem FromJson(const nlohmann::json& j) {
    QuadraticProblem p;
    try {
      p.dim = j.at("dim").get<int>();
      p.mu = j.at("mu").get<double>();
      p.smoothness = j.at("smoothness").get<double>();
      p.curvature = j.at("curvature").get<std::vector<double>>();
      p.optimum = j.at("optimum").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("quadratic problem: ") + e.what());
    }
    if (p.curvature.size() != p.optimum.size()) {
      throw FormatError("quadratic problem: curvature/optimum size mismatch");
    }
    for (const auto& c : p.optimum) {
      if (static_cast<int>(c.size()) != p.dim) {
        throw FormatError("quadratic problem: optimum of wrong dimension");
      }
    }
    return p;
  }
};

// Draws a_u ~ Uniform[mu, smoothness] and places the client optima
// c_u = m + s w_u, where the directions w_u are Gaussian and re-centred so
// that sum_u a_u w_u = 0. Then theta* = m and sigma*^2 = s^2 (1/U)
// sum_u a_u^2 ||w_u||^2, which fixes s for the requested heterogeneity
// exactly.
inline QuadraticProblem MakeQuadraticFederation(int clients, int dim, double mu,
                                                double smoothness,
                                                double heterogeneity,
                                                RandomStream& stream) {
  if (clients < 1) throw ConfigError("clients", "must be >= 1");
  if (dim < 1) throw ConfigError("dim", "must be >= 1");
  if (!(mu > 0.0)) throw ConfigError("mu", "must be > 0");
  if (!(smoothness >= mu)) throw ConfigError("smoothness", "must be >= mu");
  if (!(heterogeneity >= 0.0)) {
    throw ConfigError("heterogeneity", "must be >= 0");
  }
  QuadraticProblem p;
  p.dim = dim;
  p.mu = mu;
  p.smoothness = smoothness;
  std::uniform_real_distribution<double> ua(mu, smoothness);
  std::normal_distribution<double> normal(0.0, 1.0);
  p.curvature.resize(clients);
  for (double& a : p.curvature) a = ua(stream);
  std::vector<double> center(dim);
  for (double& v : center) v = normal(stream);

  std::vector<std::vector<double>> w(clients, std::vector<double>(dim));
  for (auto& wu : w) {
    for (double& v : wu) v = normal(stream);
  }
  const double asum = std::accumulate(p.curvature.begin(), p.curvature.end(), 0.0);
  std::vector<double> wbar(dim, 0.0);
  for (int u = 0; u < clients; ++u) {
    for (int j = 0; j < dim; ++j) wbar[j] += p.curvature[u] * w[u][j] / asum;
  }
  double spread = 0.0;
  for (int u = 0; u < clients; ++u) {
    for (int j = 0; j < dim; ++j) {
      w[u][j] -= wbar[j];
      spread += p.curvature[u] * p.curvature[u] * w[u][j] * w[u][j];
    }
  }
  spread /= clients;
  double scale = 0.0;
  if (heterogeneity > 0.0) {
    if (!(spread > 1e-300)) {
      throw ConfigError("heterogeneity",
                        "cannot realize heterogeneity > 0 with " +
                            std::to_string(clients) + " client(s)");
    }
    scale = std::sqrt(heterogeneity / spread);
  }
  p.optimum.assign(clients, center);
  for (int u = 0; u < clients; ++u) {
    for (int j = 0; j < dim; ++j) p.optimum[u][j] += scale * w[u][j];
  }
  return p;
}

}  // namespace qfl

#endif  // QFL_DATA_HPP_
