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
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"

#include "wdaseg/rng.hpp"
#include "wdaseg/synthdata.hpp"

using namespace wdaseg;
using namespace wdaseg::synth;

namespace {

/// Sizes of the 8-connected components of class c.
std::vector<int> component_sizes(const LabelMap& Y, int c) {
  std::vector<int> sizes;
  std::vector<std::uint8_t> seen(Y.v.size(), 0);
  for (int start = 0; start < static_cast<int>(Y.v.size()); ++start) {
    if (Y.v[start] != c || seen[start]) continue;
    int n = 0;
    std::vector<int> stack = {start};
    seen[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++n;
      const int y = p / Y.w, x = p % Y.w;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= Y.h || xx < 0 || xx >= Y.w) continue;
          const int q = yy * Y.w + xx;
          if (Y.v[q] == c && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
    }
    sizes.push_back(n);
  }
  return sizes;
}

WeakLabel scan_presence(const LabelMap& Y, int C) {
  WeakLabel y(C, 0);
  for (int y0 = 0; y0 < Y.h; ++y0)
    for (int x0 = 0; x0 < Y.w; ++x0) y[Y.at(y0, x0)] = 1;
  return y;
}

}  // namespace

TEST_CASE("generate_scene is deterministic in (seed, index)") {
  BenchmarkSpec spec;
  spec.seed = 9;
  const auto dp = large_gap_domain(spec.C);
  const auto a = generate_scene(spec, dp, 17);
  CHECK(a == generate_scene(spec, dp, 17));
  CHECK_FALSE(a == generate_scene(spec, dp, 18));
  spec.seed = 10;
  CHECK_FALSE(a == generate_scene(spec, dp, 17));
  CHECK(a.rgb.size() == 64u * 64u * 3u);
  const Grid img = a.image();
  for (double v : img.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("domain shift never alters labels") {
  const BenchmarkSpec spec;
  const auto src = source_domain(spec.C);
  const auto tgt = large_gap_domain(spec.C);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto a = generate_scene(spec, src, i);
    const auto b = generate_scene(spec, tgt, i);
    CHECK(a.mask == b.mask);
    CHECK(a.rgb != b.rgb);
  }
}

TEST_CASE("identity shift renders identically") {
  const BenchmarkSpec spec;
  DomainParams plain;
  plain.palette = default_palette(spec.C);
  const DomainParams copy = plain;
  for (std::uint64_t i = 0; i < 20; ++i) CHECK(generate_scene(spec, plain, i) == generate_scene(spec, copy, i));
  CHECK(source_domain(spec.C).hue_shift == 0.0);
  CHECK(source_domain(spec.C).noise_sigma == 0.0);
  CHECK(source_domain(spec.C).blur_radius == 0);
}

TEST_CASE("rarity 1.0 puts every class in every mask") {
  BenchmarkSpec spec;
  spec.class_rarity.assign(spec.C, 1.0);
  const auto dp = source_domain(spec.C);
  int missing = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto y = scan_presence(generate_scene(spec, dp, i).mask, spec.C);
    for (auto v : y) missing += v == 0;
  }
  CHECK(missing == 0);
}

TEST_CASE("class frequency follows rarity and regions are solid") {
  const BenchmarkSpec spec;
  const auto dp = source_domain(spec.C);
  std::vector<int> counts(spec.C, 0);
  int small_regions = 0;
  const int n = 2000;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto mask = generate_scene(spec, dp, i).mask;
    const auto y = scan_presence(mask, spec.C);
    for (int c = 0; c < spec.C; ++c) {
      counts[c] += y[c];
      if (c > 0 && y[c]) {
        for (int s : component_sizes(mask, c)) small_regions += s < 4;
      }
    }
  }
  CHECK(small_regions == 0);
  for (int c = 0; c < spec.C; ++c) {
    INFO("class " << c);
    CHECK(std::abs(counts[c] / double(n) - spec.class_rarity[c]) <= 0.03);
  }
}

TEST_CASE("weak_from_mask") {
  LabelMap bg(4, 4, 0);
  CHECK(weak_from_mask(bg, 4) == WeakLabel{1, 0, 0, 0});
  bg.at(1, 1) = 2;
  CHECK(weak_from_mask(bg, 4) == WeakLabel{1, 0, 1, 0});
  bg.at(0, 0) = 4;
  CHECK_THROWS(weak_from_mask(bg, 4));

  const BenchmarkSpec spec;
  const auto dp = large_gap_domain(spec.C);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto mask = generate_scene(spec, dp, i).mask;
    CHECK(weak_from_mask(mask, spec.C) == scan_presence(mask, spec.C));
  }
}

TEST_CASE("points_from_mask") {
  LabelMap Y(6, 6, 0);
  Y.at(2, 3) = 1;  // single pixel
  Y.at(4, 0) = 3;
  Y.at(4, 1) = 3;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto pts = points_from_mask(Y, 5, s);
    REQUIRE(pts.size() == 3);  // classes 0, 1, 3; 2 and 4 are absent
    std::set<int> cats;
    for (const auto& p : pts) {
      cats.insert(p.category);
      CHECK(Y.at(p.row, p.col) == p.category);
    }
    CHECK(cats == std::set<int>{0, 1, 3});
    for (const auto& p : pts)
      if (p.category == 1) CHECK((p.row == 2 && p.col == 3));
    CHECK(pts == points_from_mask(Y, 5, s));
  }
  int first = 0;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    for (const auto& p : points_from_mask(Y, 5, static_cast<std::uint64_t>(s)))
      if (p.category == 3) first += p.col == 0;
  }
  CHECK(std::abs(first / double(draws) - 0.5) <= 0.02);
}

TEST_CASE("n_points_from_mask") {
  LabelMap Y(20, 20, 0);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) Y.at(y, x) = 1;  // 100-pixel region
  Y.at(15, 15) = 2;
  Y.at(15, 16) = 2;
  for (std::uint64_t s = 0; s < 20; ++s) {
    CHECK(n_points_from_mask(Y, 3, 1, s) == points_from_mask(Y, 3, s));
    const auto pts = n_points_from_mask(Y, 3, 5, s);
    std::set<std::pair<int, int>> ones;
    int twos = 0;
    for (const auto& p : pts) {
      CHECK(Y.at(p.row, p.col) == p.category);
      if (p.category == 1) ones.insert({p.row, p.col});
      if (p.category == 2) ++twos;
    }
    CHECK(ones.size() == 5);
    CHECK(twos == 2);
  }
  CHECK_THROWS(n_points_from_mask(Y, 3, 0, 0));
}

TEST_CASE("spec and domain validation") {
  BenchmarkSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.class_rarity[3] = 0.0;
  CHECK_THROWS(spec.validate());
  spec = {};
  spec.class_rarity.pop_back();
  CHECK_THROWS(spec.validate());
  spec = {};
  spec.H = 4;
  CHECK_THROWS(spec.validate());

  auto dp = source_domain(6);
  dp.noise_sigma = -0.1;
  CHECK_THROWS(dp.validate(6));
  dp = source_domain(6);
  dp.blur_radius = -1;
  CHECK_THROWS(dp.validate(6));
  CHECK_THROWS(source_domain(6).validate(5));
}

TEST_CASE("impossible layouts fail after bounded retries") {
  BenchmarkSpec spec;
  spec.H = spec.W = 8;
  spec.C = 8;
  spec.class_rarity.assign(8, 1.0);
  CHECK_THROWS_WITH(generate_scene(spec, source_domain(8), 0), doctest::Contains("after 100 attempts"));
}

TEST_CASE("dataset splits, batches and disk round trip") {
  BenchmarkSpec spec;
  spec.n_source = 6;
  spec.n_target = 5;
  spec.n_val = 3;
  spec.seed = 4;
  const auto ds = make_dataset(spec, source_domain(spec.C), large_gap_domain(spec.C));
  CHECK(ds.source.size() == 6);
  CHECK(ds.target.size() == 5);
  CHECK(ds.source_val.size() == 3);
  CHECK(ds.target_val.size() == 3);
  // Splits draw disjoint scene indices.
  CHECK_FALSE(ds.source[0].mask == ds.target[0].mask);
  CHECK_FALSE(ds.source[0].mask == ds.source_val[0].mask);
  for (auto s : {Split::source, Split::target, Split::source_val, Split::target_val})
    CHECK(parse_split(split_name(s)) == s);
  CHECK_THROWS(parse_split("train"));

  const auto b = make_batch(ds.target, {4, 0, 4});
  CHECK(b.X.n == 3);
  CHECK(b.Y[0] == ds.target[4].mask);
  CHECK(b.X.image(2).v == ds.target[4].image().v);
  CHECK_THROWS(make_batch(ds.target, {}));

  const auto dir = std::filesystem::temp_directory_path() / "wdaseg_test_dataset";
  std::filesystem::remove_all(dir);
  write_dataset(dir, ds, "test");
  const auto back = read_dataset(dir);
  CHECK(back.spec == ds.spec);
  CHECK(back.source_dp == ds.source_dp);
  CHECK(back.target_dp == ds.target_dp);
  CHECK(back.source == ds.source);
  CHECK(back.target == ds.target);
  CHECK(back.source_val == ds.source_val);
  CHECK(back.target_val == ds.target_val);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(read_dataset(dir));
}
