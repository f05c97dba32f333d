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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "common/checks.hpp"
#include "wdaseg/nets.hpp"

using namespace wdaseg;
using namespace wdaseg::nets;

namespace {

Tensor random_tensor(Rng& rng, int n, int h, int w, int c, double lo = -1.0, double hi = 1.0) {
  Tensor t(n, h, w, c);
  for (auto& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

SegNetConfig small_config() {
  SegNetConfig c;
  c.base_width = 5;
  c.feature_dim = 4;
  c.num_classes = 3;
  return c;
}

/// Checks parameter gradients of a scalar objective on a sample of entries.
template <class Objective>
void check_param_grads(ParamSet& ps, Objective&& f, Rng& rng, int per_param = 12) {
  for (auto& p : ps.all()) {
    const int n = static_cast<int>(p.value.size());
    std::vector<double> fd, an;
    for (int s = 0; s < std::min(n, per_param); ++s) {
      const int i = n <= per_param ? s : rng.below(n);
      const double x0 = p.value[i];
      p.value[i] = x0 + testing::kFdStep;
      const double fp = f();
      p.value[i] = x0 - testing::kFdStep;
      const double fm = f();
      p.value[i] = x0;
      fd.push_back((fp - fm) / (2 * testing::kFdStep));
      an.push_back(p.grad[i]);
    }
    INFO(p.name);
    CHECK(testing::rel_error(an, fd) < 1e-5);
  }
}

}  // namespace

TEST_CASE("SegNet shapes and softmax output") {
  const auto nets = init_networks(small_config(), 0);
  Rng rng(1);
  const Tensor x = random_tensor(rng, 2, 8, 12, 3, 0.0, 1.0);
  const auto out = nets.seg.forward(x);
  CHECK(out.F.h == 2);
  CHECK(out.F.w == 3);
  CHECK(out.F.c == 4);
  CHECK(out.A.c == 3);
  CHECK(out.O.h == 8);
  CHECK(out.O.w == 12);
  for (std::size_t p = 0; p < out.O.v.size() / 3; ++p) {
    CHECK(std::abs(out.O.v[3 * p] + out.O.v[3 * p + 1] + out.O.v[3 * p + 2] - 1.0) < 1e-6);
  }
  CHECK_THROWS(nets.seg.forward(random_tensor(rng, 1, 6, 8, 3)));
  CHECK_THROWS(nets.seg.forward(random_tensor(rng, 1, 8, 8, 2)));
}

TEST_CASE("zeroed classifier gives uniform output") {
  auto nets = init_networks(small_config(), 2);
  for (auto& v : nets.seg.params()["cls.w"].value) v = 0.0;
  Rng rng(2);
  const auto out = nets.seg.forward(random_tensor(rng, 1, 8, 8, 3, 0.0, 1.0));
  for (double a : out.A.v) CHECK(a == 0.0);
  for (double o : out.O.v) CHECK(o == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("forward is a pure function of parameters and input") {
  const auto nets = init_networks(SegNetConfig{}, 3);
  Rng rng(3);
  const Tensor x = random_tensor(rng, 2, 16, 16, 3, 0.0, 1.0);
  const auto a = nets.seg.forward(x);
  const auto b = nets.seg.forward(x);
  CHECK(a.F.v == b.F.v);
  CHECK(a.A.v == b.A.v);
  CHECK(a.O.v == b.O.v);
  CHECK(nets.seg.forward_cached(x).out.O.v == a.O.v);
}

TEST_CASE("SegNet backward matches central differences") {
  for (int ds : {1, 2, 4, 8}) {
    auto cfg = small_config();
    cfg.downsample_factor = ds;
    auto nets = init_networks(cfg, 4 + ds);
    Rng rng(40 + ds);
    // Zero biases put dead-unit pixels exactly on a rectifier kink, where
    // central differences are meaningless.
    for (auto& p : nets.seg.params().all())
      if (p.name.ends_with(".b"))
        for (auto& v : p.value) v = rng.uniform(-0.1, 0.1);
    const Tensor x = random_tensor(rng, 2, 8, 8, 3, 0.0, 1.0);
    const auto probe = nets.seg.forward(x);
    const Tensor gF = random_tensor(rng, probe.F.n, probe.F.h, probe.F.w, probe.F.c);
    const Tensor gA = random_tensor(rng, probe.A.n, probe.A.h, probe.A.w, probe.A.c);
    const Tensor gO = random_tensor(rng, probe.O.n, probe.O.h, probe.O.w, probe.O.c);
    auto f = [&] {
      const auto o = nets.seg.forward(x);
      return dot(o.F.v, gF.v) + dot(o.A.v, gA.v) + dot(o.O.v, gO.v);
    };
    nets.seg.params().zero_grad();
    nets.seg.backward(nets.seg.forward_cached(x), gF, gA, gO);
    INFO("downsample " << ds);
    check_param_grads(nets.seg.params(), f, rng);
  }
}

TEST_CASE("SegNet backward accepts empty upstream gradients") {
  auto nets = init_networks(small_config(), 5);
  Rng rng(5);
  const Tensor x = random_tensor(rng, 1, 8, 8, 3, 0.0, 1.0);
  const auto cache = nets.seg.forward_cached(x);
  nets.seg.params().zero_grad();
  nets.seg.backward(cache, Tensor{}, Tensor{}, Tensor{});
  for (const auto& p : nets.seg.params().all())
    for (double g : p.grad) CHECK(g == 0.0);
  CHECK_THROWS(nets.seg.backward(cache, Tensor(1, 1, 1, 1), Tensor{}, Tensor{}));
}

TEST_CASE("DiscriminatorBank") {
  CHECK(DiscriminatorBank::parameter_count(6, 64) == 6u * (64 * 64 + 64 + 64 * 64 + 64 + 64 + 1));
  DiscriminatorBank bank(6, 64);
  CHECK(bank.params().count() == DiscriminatorBank::parameter_count(6, 64));

  // Zero final layer: every output is exactly one half.
  Rng rng(6);
  for (auto& p : bank.params().all())
    for (auto& v : p.value) v = rng.normal() * 0.1;
  for (int c = 0; c < 6; ++c) {
    for (auto& v : bank.params()["d" + std::to_string(c) + ".w3"].value) v = 0.0;
    bank.params()["d" + std::to_string(c) + ".b3"].value[0] = 0.0;
  }
  CategoryFeatures feats(6, 64);
  for (auto& v : feats.v) v = rng.normal();
  for (double p : bank.forward(feats)) CHECK(p == 0.5);
  CHECK(bank.forward(feats) == bank.forward(feats));

  CHECK(testing::discriminator_oracle_deviation(200, 7) <= 1e-10);
  CHECK_THROWS(bank.forward(CategoryFeatures(6, 63)));
  CHECK_THROWS(bank.forward(CategoryFeatures(5, 64)));
}

TEST_CASE("DiscriminatorBank backward matches central differences") {
  DiscriminatorBank bank(3, 5);
  Rng rng(8);
  for (auto& p : bank.params().all())
    for (auto& v : p.value) v = rng.normal() * 0.6;
  CategoryFeatures feats(3, 5);
  for (auto& v : feats.v) v = rng.normal();
  const std::vector<double> g = {0.7, -1.3, 0.4};
  auto f = [&] { return dot(bank.forward(feats), g); };
  BankCache cache;
  bank.forward(feats, cache);
  bank.params().zero_grad();
  const auto dfeats = bank.backward(cache, g);
  check_param_grads(bank.params(), f, rng, 30);
  const auto fd = testing::fd_gradient(
      [&](const std::vector<double>& x) {
        CategoryFeatures cf(3, 5);
        cf.v = x;
        return dot(bank.forward(cf), g);
      },
      feats.v);
  CHECK(testing::rel_error(dfeats.v, fd) < 1e-5);
}

TEST_CASE("bank row c only reaches discriminator c") {
  DiscriminatorBank bank(4, 3);
  Rng rng(9);
  for (auto& p : bank.params().all())
    for (auto& v : p.value) v = rng.normal();
  CategoryFeatures feats(4, 3);
  for (auto& v : feats.v) v = rng.normal();
  const auto before = bank.forward(feats);
  for (auto& v : feats.row(2)) v += 1.0;
  const auto after = bank.forward(feats);
  CHECK(after[0] == before[0]);
  CHECK(after[1] == before[1]);
  CHECK(after[3] == before[3]);
}

TEST_CASE("OutputDiscriminator backward matches central differences") {
  OutputDiscriminator d(3, 4, 2);
  Rng rng(10);
  for (auto& p : d.params().all())
    for (auto& v : p.value) v = rng.normal() * 0.5;
  const Tensor O = random_tensor(rng, 2, 16, 16, 3, 0.0, 1.0);
  const std::vector<double> g = {0.9, -0.4};
  auto f = [&] { return dot(d.forward(O), g); };
  OutDiscCache cache;
  const auto probs = d.forward(O, cache);
  for (double p : probs) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  d.params().zero_grad();
  const Tensor dO = d.backward(cache, g);
  check_param_grads(d.params(), f, rng, 20);
  std::vector<double> fd, an;
  for (int s = 0; s < 40; ++s) {
    const int i = rng.below(static_cast<int>(O.v.size()));
    Tensor Op = O, Om = O;
    Op.v[i] += testing::kFdStep;
    Om.v[i] -= testing::kFdStep;
    fd.push_back((dot(d.forward(Op), g) - dot(d.forward(Om), g)) / (2 * testing::kFdStep));
    an.push_back(dO.v[i]);
  }
  CHECK(testing::rel_error(an, fd) < 1e-5);
}

TEST_CASE("init_networks") {
  const auto a = init_networks(SegNetConfig{}, 0);
  const auto b = init_networks(SegNetConfig{}, 0);
  const auto c = init_networks(SegNetConfig{}, 1);
  CHECK(checksum(a) == checksum(b));
  CHECK(a.seg.params().values_equal(b.seg.params()));
  CHECK(checksum(a) != checksum(c));
  CHECK_FALSE(a.seg.params().values_equal(c.seg.params()));
  // Frozen at first build.
  CHECK(checksum(a) == 10650902241678087961ULL);

  for (const auto& p : a.seg.params().all()) {
    const bool bias = p.name.ends_with(".b");
    const int fan_in = bias ? 1 : static_cast<int>(p.value.size()) / p.shape.back();
    // Rectified layers get gain sqrt(2); the classifier is linear.
    const double gain = p.name == "cls.w" ? 1.0 : std::sqrt(2.0);
    const double bound = gain * std::sqrt(3.0 / fan_in);
    for (double v : p.value) {
      if (bias) {
        CHECK(v == 0.0);
      } else {
        CHECK(std::abs(v) <= bound);
      }
    }
  }
  CHECK_THROWS(init_networks(SegNetConfig{.base_width = 0}, 0));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto path = std::filesystem::temp_directory_path() / "wdaseg_test_ckpt.bin";
  auto cfg = small_config();
  cfg.downsample_factor = 2;
  const auto a = init_networks(cfg, 11);
  save_checkpoint(path, a);
  const auto b = load_checkpoint(path);
  CHECK(b.seg.config() == cfg);
  CHECK(checksum(a) == checksum(b));
  CHECK(a.seg.params().values_equal(b.seg.params()));
  CHECK(a.bank.params().values_equal(b.bank.params()));
  CHECK(a.out_disc.params().values_equal(b.out_disc.params()));

  // Truncated and corrupted files are rejected.
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  CHECK_THROWS(load_checkpoint(path));
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS(load_checkpoint(path));
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}
