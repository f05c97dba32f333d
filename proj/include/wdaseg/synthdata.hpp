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

// Two-domain synthetic scene benchmark.
//
// Scene geometry (which classes appear, where, in which shape) is a pure
// function of (seed, scene index). A DomainParams then renders that geometry
// to pixels; the domain shift touches colours only, never the mask.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wdaseg/tensor.hpp"

namespace wdaseg::synth {

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
  bool operator==(const Rgb&) const = default;
};

struct DomainParams {
  std::vector<Rgb> palette;  // base colour per category
  double hue_shift = 0.0;    // fraction of a full hue turn
  double brightness = 0.0;   // added to every channel
  double noise_sigma = 0.0;
  int blur_radius = 0;

  void validate(int num_classes) const;
  bool operator==(const DomainParams&) const = default;
};

std::vector<Rgb> default_palette(int num_classes);
/// Unshifted rendering with the default palette.
DomainParams source_domain(int num_classes);
/// The "large gap" preset: hue 0.15, brightness -0.2, noise 0.08, blur 1.
DomainParams large_gap_domain(int num_classes);

struct BenchmarkSpec {
  int H = 64;
  int W = 64;
  int C = 6;
  std::vector<double> class_rarity = {1.0, 0.9, 0.7, 0.5, 0.3, 0.1};
  int n_source = 500;
  int n_target = 500;
  int n_val = 100;  // held-out scenes per domain for evaluation
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const BenchmarkSpec&) const = default;
};

/// One rendered scene: 8-bit RGB (row-major, 3 bytes per pixel) and its mask.
struct Scene {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> rgb;
  LabelMap mask;

  /// Image as doubles in [0, 1] (exact multiples of 1/255).
  Grid image() const;
  bool operator==(const Scene&) const = default;
};

inline constexpr int kMaxPlacementRetries = 100;

/// Renders scene `index`. Deterministic in (spec.seed, index, dp).
Scene generate_scene(const BenchmarkSpec& spec, const DomainParams& dp, std::uint64_t index);

WeakLabel weak_from_mask(const LabelMap& Y, int num_classes);

/// One uniformly drawn pixel per present category.
PointLabelSet points_from_mask(const LabelMap& Y, int num_classes, std::uint64_t seed);

/// min(n, region size) distinct uniformly drawn pixels per present category.
/// n = 1 reproduces points_from_mask for the same seed.
PointLabelSet n_points_from_mask(const LabelMap& Y, int num_classes, int n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Datasets

enum class Split { source, target, source_val, target_val };

const char* split_name(Split s);
Split parse_split(const std::string& name);
/// Scene-index offset of a split; splits never share geometry.
std::uint64_t split_offset(Split s);

struct Dataset {
  BenchmarkSpec spec;
  DomainParams source_dp;
  DomainParams target_dp;
  std::vector<Scene> source, target, source_val, target_val;

  const std::vector<Scene>& split(Split s) const;
  std::vector<Scene>& split(Split s);
};

Dataset make_dataset(const BenchmarkSpec& spec, const DomainParams& source_dp,
                     const DomainParams& target_dp);

struct BatchView {
  Tensor X;                   // (B, H, W, 3)
  std::vector<LabelMap> Y;    // B masks
  std::vector<std::size_t> indices;
};

BatchView make_batch(const std::vector<Scene>& scenes, const std::vector<std::size_t>& indices);

/// Writes one directory per split (PPM images, PGM masks) plus manifest.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const std::string& tool_version);
/// Loads a dataset written by write_dataset.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace wdaseg::synth
