// Copyright 2026 The wdaseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdaseg {

/// Raised when a loss or training step produces a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A single image-shaped grid in (row, col, channel) order, channel fastest.
struct Grid {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int rows, int cols, int channels, double fill = 0.0)
      : h(rows), w(cols), c(channels),
        v(static_cast<std::size_t>(rows) * cols * channels, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(h) * w; }
  std::size_t size() const { return v.size(); }
  bool same_shape(const Grid& o) const { return h == o.h && w == o.w && c == o.c; }

  std::size_t index(int y, int x, int k) const {
    return (static_cast<std::size_t>(y) * w + x) * c + k;
  }
  double& at(int y, int x, int k) { return v[index(y, x, k)]; }
  double at(int y, int x, int k) const { return v[index(y, x, k)]; }

  std::span<double> pixel(std::size_t p) { return {v.data() + p * c, static_cast<std::size_t>(c)}; }
  std::span<const double> pixel(std::size_t p) const {
    return {v.data() + p * c, static_cast<std::size_t>(c)};
  }
};

// Logits at the downsampled resolution (H', W', C).
using PredictionMap = Grid;
// Backbone features at the downsampled resolution (H', W', D_f).
using FeatureGrid = Grid;
// Per-pixel class probabilities at full resolution (H, W, C).
using OutputMap = Grid;

/// Batch of grids, (n, h, w, c) with channel fastest.
struct Tensor {
  int n = 0;
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int batch, int rows, int cols, int channels, double fill = 0.0)
      : n(batch), h(rows), w(cols), c(channels),
        v(static_cast<std::size_t>(batch) * rows * cols * channels, fill) {}

  bool empty() const { return v.empty(); }
  std::size_t size() const { return v.size(); }
  std::size_t image_size() const { return static_cast<std::size_t>(h) * w * c; }
  bool same_shape(const Tensor& o) const { return n == o.n && h == o.h && w == o.w && c == o.c; }

  std::size_t index(int b, int y, int x, int k) const {
    return ((static_cast<std::size_t>(b) * h + y) * w + x) * c + k;
  }
  double& at(int b, int y, int x, int k) { return v[index(b, y, x, k)]; }
  double at(int b, int y, int x, int k) const { return v[index(b, y, x, k)]; }

  std::span<double> image_span(int b) { return {v.data() + b * image_size(), image_size()}; }
  std::span<const double> image_span(int b) const {
    return {v.data() + b * image_size(), image_size()};
  }

  Grid image(int b) const {
    Grid g(h, w, c);
    auto src = image_span(b);
    std::copy(src.begin(), src.end(), g.v.begin());
    return g;
  }
  void set_image(int b, const Grid& g) {
    if (g.h != h || g.w != w || g.c != c) throw std::invalid_argument("Tensor::set_image: shape mismatch");
    std::copy(g.v.begin(), g.v.end(), image_span(b).begin());
  }
};

/// Per-pixel class indices; the compact form of a one-hot mask.
struct LabelMap {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> v;

  LabelMap() = default;
  LabelMap(int rows, int cols, std::uint8_t fill = 0)
      : h(rows), w(cols), v(static_cast<std::size_t>(rows) * cols, fill) {}

  std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::size_t pixels() const { return v.size(); }
  bool operator==(const LabelMap&) const = default;
};

/// Multi-hot category presence vector, entries in {0, 1}.
using WeakLabel = std::vector<std::uint8_t>;

/// Per-category presence probabilities.
using CategoryProb = std::vector<double>;

/// One pooled feature vector per category, row-major (classes x dim).
struct CategoryFeatures {
  int classes = 0;
  int dim = 0;
  std::vector<double> v;

  CategoryFeatures() = default;
  CategoryFeatures(int num_classes, int feature_dim, double fill = 0.0)
      : classes(num_classes), dim(feature_dim),
        v(static_cast<std::size_t>(num_classes) * feature_dim, fill) {}

  std::span<double> row(int k) { return {v.data() + static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> row(int k) const {
    return {v.data() + static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim)};
  }
};

struct PointLabel {
  int row = 0;
  int col = 0;
  int category = 0;
  bool operator==(const PointLabel&) const = default;
};

using PointLabelSet = std::vector<PointLabel>;

}  // namespace wdaseg
