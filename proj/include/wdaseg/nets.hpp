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

// Segmentation network, category discriminator bank and output-space
// discriminator. Each network owns a ParamSet; backward passes accumulate
// into that network's grads only.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <span>
#include <vector>

#include "wdaseg/params.hpp"
#include "wdaseg/tensor.hpp"

namespace wdaseg::nets {

struct SegNetConfig {
  int input_channels = 3;
  int base_width = 32;
  int downsample_factor = 4;  // one of 1, 2, 4, 8
  int feature_dim = 64;
  int num_classes = 6;

  void validate() const;
  /// Throws unless H and W are divisible by the downsample factor.
  void validate_input(int H, int W) const;
  bool operator==(const SegNetConfig&) const = default;
};

struct NetOutputs {
  Tensor F;  // (B, H', W', D_f) features
  Tensor A;  // (B, H', W', C) logits
  Tensor O;  // (B, H, W, C) upsampled, pixel-wise softmax
};

/// Activations kept from a forward pass for the backward pass.
struct SegCache {
  Tensor x;
  Tensor c1, c2, c3;
  NetOutputs out;
};

/// Three 3x3 conv blocks (stride 2 on alternate blocks), a 1x1 conv to the
/// feature grid F, and a 1x1 classifier to the logits A. O is A upsampled
/// bilinearly by the downsample factor and softmaxed per pixel.
class SegNet {
 public:
  SegNet() = default;
  explicit SegNet(const SegNetConfig& cfg);

  const SegNetConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  NetOutputs forward(const Tensor& x) const;
  SegCache forward_cached(const Tensor& x) const;

  /// Back-propagates dL/dF, dL/dA and dL/dO (each may be empty) and
  /// accumulates parameter gradients.
  void backward(const SegCache& cache, const Tensor& dF, const Tensor& dA, const Tensor& dO);

  /// Strides of the three conv blocks for the configured downsample factor.
  std::array<int, 3> block_strides() const;

 private:
  SegNetConfig cfg_;
  ParamSet params_;
};

struct BankCache {
  CategoryFeatures in;
  std::vector<double> h1, h2;  // (C, D) post-activation
  std::vector<double> prob;    // (C)
};

/// C independent discriminators, each D_f -> D_f -> D_f -> 1 with rectified
/// hidden layers and a sigmoid output. D^c only ever sees row c.
class DiscriminatorBank {
 public:
  DiscriminatorBank() = default;
  DiscriminatorBank(int classes, int dim);

  int classes() const { return classes_; }
  int dim() const { return dim_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Entry c is D^c(feats.row(c)).
  std::vector<double> forward(const CategoryFeatures& feats) const;
  std::vector<double> forward(const CategoryFeatures& feats, BankCache& cache) const;

  /// Accumulates parameter gradients and returns dL/dfeats.
  CategoryFeatures backward(const BankCache& cache, std::span<const double> dprob);

  /// Names of the parameters belonging to discriminator c.
  std::vector<std::string> param_names(int c) const;

  static std::size_t parameter_count(int classes, int dim);

 private:
  int classes_ = 0;
  int dim_ = 0;
  ParamSet params_;
};

struct OutDiscCache {
  Tensor pooled, h1, h2;
  std::vector<double> gap;   // (B, width)
  std::vector<double> prob;  // (B)
};

/// Per-image domain classifier over the softmax output map: average pool,
/// two stride-2 3x3 convs with leaky rectifiers, global average, linear, sigmoid.
class OutputDiscriminator {
 public:
  OutputDiscriminator() = default;
  OutputDiscriminator(int classes, int width = 16, int pool = 4);

  int classes() const { return classes_; }
  int width() const { return width_; }
  int pool() const { return pool_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  std::vector<double> forward(const Tensor& O) const;
  std::vector<double> forward(const Tensor& O, OutDiscCache& cache) const;
  /// Accumulates parameter gradients and returns dL/dO.
  Tensor backward(const OutDiscCache& cache, std::span<const double> dprob);

  static constexpr double kLeakySlope = 0.2;

 private:
  int classes_ = 0;
  int width_ = 0;
  int pool_ = 0;
  ParamSet params_;
};

struct Networks {
  SegNet seg;
  DiscriminatorBank bank;
  OutputDiscriminator out_disc;
};

/// Fan-in scaled uniform weights, zero biases. Each array's stream is derived
/// from (seed, network, parameter name), so it is independent of
/// registration order.
Networks init_networks(const SegNetConfig& cfg, std::uint64_t seed);

/// Combined checksum of every parameter array of the three networks.
std::uint64_t checksum(const Networks& nets);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Networks& nets);
Networks load_checkpoint(const std::filesystem::path& path);

}  // namespace wdaseg::nets
