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

#include "wdaseg/nets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "wdaseg/kernels.hpp"
#include "wdaseg/rng.hpp"

namespace wdaseg::nets {
namespace {

using kernels::ConvShape;

ConvShape conv_shape(const Param& w, int stride) {
  // Weights are (k, k, in, out).
  return ConvShape{w.shape[2], w.shape[3], w.shape[0], stride};
}

void add_conv(ParamSet& ps, const std::string& name, int k, int in, int out) {
  ps.add(name + ".w", {k, k, in, out});
  ps.add(name + ".b", {out});
}

void conv(const ParamSet& ps, const std::string& name, int stride, const Tensor& x, Tensor& y) {
  const auto& w = ps[name + ".w"];
  kernels::conv_forward(x, w.value, ps[name + ".b"].value, conv_shape(w, stride), y);
}

void conv_back(ParamSet& ps, const std::string& name, int stride, const Tensor& x, const Tensor& dy,
               Tensor* dx) {
  auto& w = ps[name + ".w"];
  auto& b = ps[name + ".b"];
  kernels::conv_backward(x, dy, w.value, conv_shape(w, stride), w.grad, b.grad, dx);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void add_into(Tensor& dst, const Tensor& src) {
  if (src.empty()) return;
  if (dst.empty()) {
    dst = src;
    return;
  }
  if (!dst.same_shape(src)) throw std::invalid_argument("gradient shape mismatch");
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

std::uint64_t name_hash(const std::string& s) {
  return fnv1a({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
}

// Fan-in scaled uniform: bound = gain * sqrt(3 / fan_in). fan_in is the
// product of every dimension but the last.
void init_uniform(ParamSet& ps, std::uint64_t seed, std::uint64_t net_tag,
                  const std::vector<std::string>& linear_outputs) {
  for (auto& p : ps.all()) {
    if (p.shape.size() < 2) continue;  // biases stay zero
    int fan_in = 1;
    for (std::size_t d = 0; d + 1 < p.shape.size(); ++d) fan_in *= p.shape[d];
    const bool linear = std::find(linear_outputs.begin(), linear_outputs.end(), p.name) != linear_outputs.end();
    const double gain = linear ? 1.0 : std::sqrt(2.0);
    const double bound = gain * std::sqrt(3.0 / fan_in);
    Rng rng(derive_seed(seed, {net_tag, name_hash(p.name)}));
    for (auto& v : p.value) v = rng.uniform(-bound, bound);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// SegNet

void SegNetConfig::validate() const {
  if (input_channels < 1) throw std::invalid_argument("SegNetConfig: input_channels must be >= 1");
  if (base_width < 1) throw std::invalid_argument("SegNetConfig: base_width must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("SegNetConfig: feature_dim must be >= 1");
  if (num_classes < 1) throw std::invalid_argument("SegNetConfig: num_classes must be >= 1");
  if (downsample_factor != 1 && downsample_factor != 2 && downsample_factor != 4 && downsample_factor != 8) {
    throw std::invalid_argument("SegNetConfig: downsample_factor must be 1, 2, 4 or 8");
  }
  if (num_classes > 255) throw std::invalid_argument("SegNetConfig: num_classes must be <= 255");
}

void SegNetConfig::validate_input(int H, int W) const {
  if (H < 1 || W < 1 || H % downsample_factor != 0 || W % downsample_factor != 0) {
    throw std::invalid_argument("seg_forward: H and W must be divisible by the downsample factor (" +
                                std::to_string(downsample_factor) + ")");
  }
}

SegNet::SegNet(const SegNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  add_conv(params_, "conv1", 3, cfg.input_channels, cfg.base_width);
  add_conv(params_, "conv2", 3, cfg.base_width, cfg.base_width);
  add_conv(params_, "conv3", 3, cfg.base_width, cfg.base_width);
  add_conv(params_, "feat", 1, cfg.base_width, cfg.feature_dim);
  add_conv(params_, "cls", 1, cfg.feature_dim, cfg.num_classes);
}

std::array<int, 3> SegNet::block_strides() const {
  switch (cfg_.downsample_factor) {
    case 1: return {1, 1, 1};
    case 2: return {2, 1, 1};
    case 4: return {2, 1, 2};
    default: return {2, 2, 2};
  }
}

NetOutputs SegNet::forward(const Tensor& x) const { return forward_cached(x).out; }

SegCache SegNet::forward_cached(const Tensor& x) const {
  if (x.c != cfg_.input_channels) throw std::invalid_argument("seg_forward: input channel mismatch");
  cfg_.validate_input(x.h, x.w);
  const auto st = block_strides();
  SegCache c;
  c.x = x;
  conv(params_, "conv1", st[0], x, c.c1);
  kernels::relu_forward(c.c1);
  conv(params_, "conv2", st[1], c.c1, c.c2);
  kernels::relu_forward(c.c2);
  conv(params_, "conv3", st[2], c.c2, c.c3);
  kernels::relu_forward(c.c3);
  conv(params_, "feat", 1, c.c3, c.out.F);
  kernels::relu_forward(c.out.F);
  conv(params_, "cls", 1, c.out.F, c.out.A);
  kernels::upsample_bilinear(c.out.A, cfg_.downsample_factor, c.out.O);
  kernels::softmax_channels(c.out.O);
  return c;
}

void SegNet::backward(const SegCache& c, const Tensor& dF, const Tensor& dA, const Tensor& dO) {
  const auto st = block_strides();
  Tensor dA_total = dA;
  if (!dO.empty()) {
    Tensor dZ, dA_up;
    kernels::softmax_channels_backward(c.out.O, dO, dZ);
    kernels::upsample_bilinear_backward(dZ, cfg_.downsample_factor, dA_up);
    add_into(dA_total, dA_up);
  }

  Tensor dF_total;
  if (!dA_total.empty()) {
    conv_back(params_, "cls", 1, c.out.F, dA_total, &dF_total);
  }
  add_into(dF_total, dF);
  if (dF_total.empty()) return;

  kernels::relu_backward(c.out.F, dF_total);
  Tensor d3, d2, d1;
  conv_back(params_, "feat", 1, c.c3, dF_total, &d3);
  kernels::relu_backward(c.c3, d3);
  conv_back(params_, "conv3", st[2], c.c2, d3, &d2);
  kernels::relu_backward(c.c2, d2);
  conv_back(params_, "conv2", st[1], c.c1, d2, &d1);
  kernels::relu_backward(c.c1, d1);
  conv_back(params_, "conv1", st[0], c.x, d1, nullptr);
}

// ---------------------------------------------------------------------------
// DiscriminatorBank

DiscriminatorBank::DiscriminatorBank(int classes, int dim) : classes_(classes), dim_(dim) {
  if (classes < 1 || dim < 1) throw std::invalid_argument("DiscriminatorBank: invalid shape");
  for (int c = 0; c < classes; ++c) {
    const std::string p = "d" + std::to_string(c);
    params_.add(p + ".w1", {dim, dim});
    params_.add(p + ".b1", {dim});
    params_.add(p + ".w2", {dim, dim});
    params_.add(p + ".b2", {dim});
    params_.add(p + ".w3", {dim, 1});
    params_.add(p + ".b3", {1});
  }
}

std::size_t DiscriminatorBank::parameter_count(int classes, int dim) {
  const std::size_t d = static_cast<std::size_t>(dim);
  return static_cast<std::size_t>(classes) * (d * d + d + d * d + d + d + 1);
}

std::vector<std::string> DiscriminatorBank::param_names(int c) const {
  const std::string p = "d" + std::to_string(c);
  return {p + ".w1", p + ".b1", p + ".w2", p + ".b2", p + ".w3", p + ".b3"};
}

std::vector<double> DiscriminatorBank::forward(const CategoryFeatures& feats) const {
  BankCache cache;
  return forward(feats, cache);
}

std::vector<double> DiscriminatorBank::forward(const CategoryFeatures& feats, BankCache& cache) const {
  if (feats.classes != classes_ || feats.dim != dim_) {
    throw std::invalid_argument("disc_forward: feature dimension mismatch");
  }
  const int D = dim_;
  cache.in = feats;
  cache.h1.assign(static_cast<std::size_t>(classes_) * D, 0.0);
  cache.h2.assign(static_cast<std::size_t>(classes_) * D, 0.0);
  cache.prob.assign(classes_, 0.0);
  for (int c = 0; c < classes_; ++c) {
    const auto names = param_names(c);
    const auto& w1 = params_[names[0]].value;
    const auto& b1 = params_[names[1]].value;
    const auto& w2 = params_[names[2]].value;
    const auto& b2 = params_[names[3]].value;
    const auto& w3 = params_[names[4]].value;
    const auto& b3 = params_[names[5]].value;
    const auto x = feats.row(c);
    double* h1 = cache.h1.data() + static_cast<std::size_t>(c) * D;
    double* h2 = cache.h2.data() + static_cast<std::size_t>(c) * D;
    std::copy(b1.begin(), b1.end(), h1);
    for (int i = 0; i < D; ++i) {
      const double a = x[i];
      for (int j = 0; j < D; ++j) h1[j] += a * w1[static_cast<std::size_t>(i) * D + j];
    }
    for (int j = 0; j < D; ++j) h1[j] = std::max(h1[j], 0.0);
    std::copy(b2.begin(), b2.end(), h2);
    for (int i = 0; i < D; ++i) {
      const double a = h1[i];
      for (int j = 0; j < D; ++j) h2[j] += a * w2[static_cast<std::size_t>(i) * D + j];
    }
    for (int j = 0; j < D; ++j) h2[j] = std::max(h2[j], 0.0);
    double z = b3[0];
    for (int i = 0; i < D; ++i) z += h2[i] * w3[i];
    cache.prob[c] = sigmoid(z);
  }
  return cache.prob;
}

CategoryFeatures DiscriminatorBank::backward(const BankCache& cache, std::span<const double> dprob) {
  if (dprob.size() != static_cast<std::size_t>(classes_)) {
    throw std::invalid_argument("DiscriminatorBank::backward: gradient length mismatch");
  }
  const int D = dim_;
  CategoryFeatures dx(classes_, D);
  std::vector<double> dh1(D), dh2(D);
  for (int c = 0; c < classes_; ++c) {
    const double p = cache.prob[c];
    const double dz = dprob[c] * p * (1.0 - p);
    if (dz == 0.0) continue;
    const auto names = param_names(c);
    auto& w1 = params_[names[0]];
    auto& b1 = params_[names[1]];
    auto& w2 = params_[names[2]];
    auto& b2 = params_[names[3]];
    auto& w3 = params_[names[4]];
    auto& b3 = params_[names[5]];
    const auto x = cache.in.row(c);
    const double* h1 = cache.h1.data() + static_cast<std::size_t>(c) * D;
    const double* h2 = cache.h2.data() + static_cast<std::size_t>(c) * D;

    b3.grad[0] += dz;
    for (int i = 0; i < D; ++i) {
      w3.grad[i] += dz * h2[i];
      dh2[i] = h2[i] > 0.0 ? dz * w3.value[i] : 0.0;
    }
    for (int j = 0; j < D; ++j) b2.grad[j] += dh2[j];
    for (int i = 0; i < D; ++i) {
      double acc = 0.0;
      for (int j = 0; j < D; ++j) {
        w2.grad[static_cast<std::size_t>(i) * D + j] += h1[i] * dh2[j];
        acc += w2.value[static_cast<std::size_t>(i) * D + j] * dh2[j];
      }
      dh1[i] = h1[i] > 0.0 ? acc : 0.0;
    }
    for (int j = 0; j < D; ++j) b1.grad[j] += dh1[j];
    auto dxr = dx.row(c);
    for (int i = 0; i < D; ++i) {
      double acc = 0.0;
      for (int j = 0; j < D; ++j) {
        w1.grad[static_cast<std::size_t>(i) * D + j] += x[i] * dh1[j];
        acc += w1.value[static_cast<std::size_t>(i) * D + j] * dh1[j];
      }
      dxr[i] = acc;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// OutputDiscriminator

OutputDiscriminator::OutputDiscriminator(int classes, int width, int pool)
    : classes_(classes), width_(width), pool_(pool) {
  if (classes < 1 || width < 1 || pool < 1) throw std::invalid_argument("OutputDiscriminator: invalid shape");
  add_conv(params_, "c1", 3, classes, width);
  add_conv(params_, "c2", 3, width, width);
  params_.add("fc.w", {width, 1});
  params_.add("fc.b", {1});
}

std::vector<double> OutputDiscriminator::forward(const Tensor& O) const {
  OutDiscCache cache;
  return forward(O, cache);
}

std::vector<double> OutputDiscriminator::forward(const Tensor& O, OutDiscCache& cache) const {
  if (O.c != classes_) throw std::invalid_argument("OutputDiscriminator: class count mismatch");
  kernels::avgpool(O, pool_, cache.pooled);
  conv(params_, "c1", 2, cache.pooled, cache.h1);
  kernels::relu_forward(cache.h1, kLeakySlope);
  conv(params_, "c2", 2, cache.h1, cache.h2);
  kernels::relu_forward(cache.h2, kLeakySlope);

  const auto& fw = params_["fc.w"].value;
  const double fb = params_["fc.b"].value[0];
  const std::size_t P = static_cast<std::size_t>(cache.h2.h) * cache.h2.w;
  cache.gap.assign(static_cast<std::size_t>(O.n) * width_, 0.0);
  cache.prob.assign(O.n, 0.0);
  for (int b = 0; b < O.n; ++b) {
    double* g = cache.gap.data() + static_cast<std::size_t>(b) * width_;
    const auto img = cache.h2.image_span(b);
    for (std::size_t p = 0; p < P; ++p)
      for (int k = 0; k < width_; ++k) g[k] += img[p * width_ + k];
    double z = fb;
    for (int k = 0; k < width_; ++k) {
      g[k] /= static_cast<double>(P);
      z += g[k] * fw[k];
    }
    cache.prob[b] = sigmoid(z);
  }
  return cache.prob;
}

Tensor OutputDiscriminator::backward(const OutDiscCache& cache, std::span<const double> dprob) {
  const int B = cache.h2.n;
  if (dprob.size() != static_cast<std::size_t>(B)) {
    throw std::invalid_argument("OutputDiscriminator::backward: gradient length mismatch");
  }
  auto& fw = params_["fc.w"];
  auto& fb = params_["fc.b"];
  const std::size_t P = static_cast<std::size_t>(cache.h2.h) * cache.h2.w;
  Tensor dh2(B, cache.h2.h, cache.h2.w, width_);
  for (int b = 0; b < B; ++b) {
    const double p = cache.prob[b];
    const double dz = dprob[b] * p * (1.0 - p);
    fb.grad[0] += dz;
    const double* g = cache.gap.data() + static_cast<std::size_t>(b) * width_;
    auto img = dh2.image_span(b);
    for (int k = 0; k < width_; ++k) {
      fw.grad[k] += dz * g[k];
      const double dg = dz * fw.value[k] / static_cast<double>(P);
      for (std::size_t q = 0; q < P; ++q) img[q * width_ + k] = dg;
    }
  }
  kernels::relu_backward(cache.h2, dh2, kLeakySlope);
  Tensor dh1, dpooled, dO;
  conv_back(params_, "c2", 2, cache.h1, dh2, &dh1);
  kernels::relu_backward(cache.h1, dh1, kLeakySlope);
  conv_back(params_, "c1", 2, cache.pooled, dh1, &dpooled);
  kernels::avgpool_backward(dpooled, pool_, dO);
  return dO;
}

// ---------------------------------------------------------------------------

Networks init_networks(const SegNetConfig& cfg, std::uint64_t seed) {
  Networks n{SegNet(cfg), DiscriminatorBank(cfg.num_classes, cfg.feature_dim),
             OutputDiscriminator(cfg.num_classes)};
  init_uniform(n.seg.params(), seed, 1, {"cls.w"});
  std::vector<std::string> bank_out;
  for (int c = 0; c < cfg.num_classes; ++c) bank_out.push_back("d" + std::to_string(c) + ".w3");
  init_uniform(n.bank.params(), seed, 2, bank_out);
  init_uniform(n.out_disc.params(), seed, 3, {"fc.w"});
  return n;
}

std::uint64_t checksum(const Networks& nets) {
  std::uint64_t h = nets.seg.params().checksum();
  h = splitmix64(h ^ nets.bank.params().checksum());
  h = splitmix64(h ^ nets.out_disc.params().checksum());
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoint: "WDASEGCK", u32 version, config, then three parameter sections.
// Each section is u32 count followed by (u32 name_len, name, u32 ndim,
// i32 dims..., u64 n, f64 values...). Little-endian, IEEE-754 doubles.

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

constexpr char kMagic[8] = {'W', 'D', 'A', 'S', 'E', 'G', 'C', 'K'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_section(std::ostream& os, const ParamSet& ps) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ps.all().size()));
  for (const auto& p : ps.all()) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) put<std::int32_t>(os, d);
    put<std::uint64_t>(os, p.value.size());
    os.write(reinterpret_cast<const char*>(p.value.data()),
             static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
}

void read_section(std::istream& is, ParamSet& ps) {
  const auto n = get<std::uint32_t>(is);
  if (n != ps.all().size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = get<std::uint32_t>(is);
    if (len > 4096) throw std::runtime_error("checkpoint: corrupt parameter name");
    std::string name(len, '\0');
    is.read(name.data(), len);
    auto& p = ps[name];
    const auto ndim = get<std::uint32_t>(is);
    if (ndim != p.shape.size()) throw std::runtime_error("checkpoint: shape mismatch for " + name);
    for (std::uint32_t d = 0; d < ndim; ++d) {
      if (get<std::int32_t>(is) != p.shape[d]) throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    const auto count = get<std::uint64_t>(is);
    if (count != p.value.size()) throw std::runtime_error("checkpoint: size mismatch for " + name);
    is.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Networks& nets) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  const auto& c = nets.seg.config();
  put<std::int32_t>(os, c.input_channels);
  put<std::int32_t>(os, c.base_width);
  put<std::int32_t>(os, c.downsample_factor);
  put<std::int32_t>(os, c.feature_dim);
  put<std::int32_t>(os, c.num_classes);
  put<std::int32_t>(os, nets.out_disc.width());
  put<std::int32_t>(os, nets.out_disc.pool());
  write_section(os, nets.seg.params());
  write_section(os, nets.bank.params());
  write_section(os, nets.out_disc.params());
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Networks load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a wdaseg checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  SegNetConfig c;
  c.input_channels = get<std::int32_t>(is);
  c.base_width = get<std::int32_t>(is);
  c.downsample_factor = get<std::int32_t>(is);
  c.feature_dim = get<std::int32_t>(is);
  c.num_classes = get<std::int32_t>(is);
  const int width = get<std::int32_t>(is);
  const int pool = get<std::int32_t>(is);
  Networks n{SegNet(c), DiscriminatorBank(c.num_classes, c.feature_dim),
             OutputDiscriminator(c.num_classes, width, pool)};
  read_section(is, n.seg.params());
  read_section(is, n.bank.params());
  read_section(is, n.out_disc.params());
  return n;
}

}  // namespace wdaseg::nets
