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

#include "wdaseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "wdaseg/rng.hpp"

namespace wdaseg::synth {
namespace {

struct Hsv {
  double h = 0.0, s = 0.0, v = 0.0;
};

Hsv to_hsv(const Rgb& c) {
  const double mx = std::max({c.r, c.g, c.b});
  const double mn = std::min({c.r, c.g, c.b});
  const double d = mx - mn;
  Hsv o;
  o.v = mx;
  o.s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) return o;
  double h;
  if (mx == c.r) {
    h = (c.g - c.b) / d;
  } else if (mx == c.g) {
    h = 2.0 + (c.b - c.r) / d;
  } else {
    h = 4.0 + (c.r - c.g) / d;
  }
  h /= 6.0;
  o.h = h - std::floor(h);
  return o;
}

Rgb to_rgb(Hsv c) {
  c.h -= std::floor(c.h);
  c.s = std::clamp(c.s, 0.0, 1.0);
  c.v = std::clamp(c.v, 0.0, 1.0);
  const double h6 = c.h * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = c.v * (1.0 - c.s);
  const double q = c.v * (1.0 - c.s * f);
  const double t = c.v * (1.0 - c.s * (1.0 - f));
  switch (sector) {
    case 0: return {c.v, t, p};
    case 1: return {q, c.v, p};
    case 2: return {p, c.v, t};
    case 3: return {p, q, c.v};
    case 4: return {t, p, c.v};
    default: return {c.v, p, q};
  }
}

enum class ShapeKind { rect, circle, triangle };

struct Placed {
  int cls = 0;
  std::vector<int> pixels;  // flat indices
  double dh = 0.0, ds = 0.0, dv = 0.0;  // colour jitter
};

struct Texture {
  double base = 0.0;
  double amp[2] = {0.0, 0.0};
  double fy[2] = {0.0, 0.0};
  double fx[2] = {0.0, 0.0};
  double phase[2] = {0.0, 0.0};

  double at(int y, int x) const {
    double v = base;
    for (int i = 0; i < 2; ++i) v += amp[i] * std::sin(fy[i] * y + fx[i] * x + phase[i]);
    return v;
  }
};

struct Geometry {
  LabelMap mask;
  std::vector<Placed> shapes;
  Texture texture;
};

// Diameter range of category c's shapes at 64x64, scaled to the image.
std::pair<double, double> size_range(int c, int H, int W) {
  const double scale = std::min(H, W) / 64.0;
  const double lo = std::max(6.0, 14.0 - 2.0 * (c - 1));
  return {lo * scale, (lo + 6.0) * scale};
}

std::vector<int> rasterize(ShapeKind kind, double cy, double cx, double radius, double aspect, double angle,
                           int H, int W) {
  std::vector<int> px;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int y1 = std::min(H - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int x1 = std::min(W - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  double vy[3] = {}, vx[3] = {};
  if (kind == ShapeKind::triangle) {
    for (int i = 0; i < 3; ++i) {
      const double a = angle + i * 2.0943951023931953;
      vy[i] = cy + radius * std::sin(a);
      vx[i] = cx + radius * std::cos(a);
    }
  }
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double py = y + 0.5 - cy;
      const double pxx = x + 0.5 - cx;
      bool inside = false;
      switch (kind) {
        case ShapeKind::rect:
          inside = std::abs(py) <= radius * aspect && std::abs(pxx) <= radius;
          break;
        case ShapeKind::circle:
          inside = py * py + pxx * pxx <= radius * radius;
          break;
        case ShapeKind::triangle: {
          const double qy = y + 0.5, qx = x + 0.5;
          double sgn[3];
          for (int i = 0; i < 3; ++i) {
            const int j = (i + 1) % 3;
            sgn[i] = (vx[j] - vx[i]) * (qy - vy[i]) - (vy[j] - vy[i]) * (qx - vx[i]);
          }
          inside = (sgn[0] >= 0 && sgn[1] >= 0 && sgn[2] >= 0) || (sgn[0] <= 0 && sgn[1] <= 0 && sgn[2] <= 0);
          break;
        }
      }
      if (inside) px.push_back(y * W + x);
    }
  }
  return px;
}

// Each category keeps one shape kind in both domains, so geometry survives
// the domain shift while colour does not.
ShapeKind shape_kind(int c) { return static_cast<ShapeKind>((c - 1) % 3); }

// One layout attempt; false if some shape found no free spot.
bool place_shapes(const BenchmarkSpec& spec, const std::vector<int>& present, Rng& rng, Geometry& g) {
  const int H = spec.H, W = spec.W;
  g.mask = LabelMap(H, W, 0);
  g.shapes.clear();
  // Occupancy including a one-pixel margin around placed shapes.
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(H) * W, 0);
  for (int c : present) {
    const int count = rng.uniform() < 0.5 ? 1 : 2;
    for (int s = 0; s < count; ++s) {
      const auto [dlo, dhi] = size_range(c, H, W);
      bool placed = false;
      for (int attempt = 0; attempt < kMaxPlacementRetries && !placed; ++attempt) {
        const auto kind = shape_kind(c);
        const double radius = 0.5 * rng.uniform(dlo, dhi);
        const double aspect = rng.uniform(0.6, 1.0);
        const double angle = rng.uniform(0.0, 6.283185307179586);
        const double cy = rng.uniform(radius, H - radius);
        const double cx = rng.uniform(radius, W - radius);
        auto px = rasterize(kind, cy, cx, radius, aspect, angle, H, W);
        if (px.size() < 4) continue;
        const bool clear = std::none_of(px.begin(), px.end(), [&](int p) { return blocked[p] != 0; });
        if (!clear) continue;
        Placed shape;
        shape.cls = c;
        shape.dh = rng.uniform(-0.03, 0.03);
        shape.ds = rng.uniform(-0.1, 0.1);
        shape.dv = rng.uniform(-0.1, 0.1);
        for (int p : px) {
          g.mask.v[p] = static_cast<std::uint8_t>(c);
          const int y = p / W, x = p % W;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy >= 0 && yy < H && xx >= 0 && xx < W) blocked[yy * W + xx] = 1;
            }
        }
        shape.pixels = std::move(px);
        g.shapes.push_back(std::move(shape));
        placed = true;
      }
      if (!placed) return false;
    }
  }
  return true;
}

Geometry make_geometry(const BenchmarkSpec& spec, std::uint64_t index) {
  Rng rng(derive_seed(spec.seed, {index}));
  Geometry g;
  g.texture.base = rng.uniform(-0.05, 0.05);
  for (int i = 0; i < 2; ++i) {
    g.texture.amp[i] = rng.uniform(0.02, 0.08);
    g.texture.fy[i] = rng.uniform(-0.4, 0.4);
    g.texture.fx[i] = rng.uniform(-0.4, 0.4);
    g.texture.phase[i] = rng.uniform(0.0, 6.283185307179586);
  }

  std::vector<int> present;
  for (int c = 1; c < spec.C; ++c) {
    if (rng.uniform() < spec.class_rarity[c]) present.push_back(c);
  }

  for (int layout = 0; layout < kMaxPlacementRetries; ++layout) {
    if (place_shapes(spec, present, rng, g)) return g;
  }
  throw std::runtime_error("generate_scene: could not lay out scene " + std::to_string(index) + " after " +
                           std::to_string(kMaxPlacementRetries) + " attempts");
}

Rgb render_color(const DomainParams& dp, const Hsv& base) {
  Hsv h = base;
  h.h += dp.hue_shift;
  Rgb c = to_rgb(h);
  c.r = std::clamp(c.r + dp.brightness, 0.0, 1.0);
  c.g = std::clamp(c.g + dp.brightness, 0.0, 1.0);
  c.b = std::clamp(c.b + dp.brightness, 0.0, 1.0);
  return c;
}

void box_blur(std::vector<double>& img, int H, int W, int r) {
  if (r <= 0) return;
  std::vector<double> out(img.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int k = 0; k < 3; ++k) {
        double s = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = std::clamp(y + dy, 0, H - 1);
            const int xx = std::clamp(x + dx, 0, W - 1);
            s += img[(static_cast<std::size_t>(yy) * W + xx) * 3 + k];
          }
        out[(static_cast<std::size_t>(y) * W + x) * 3 + k] = s / ((2 * r + 1) * (2 * r + 1));
      }
  img.swap(out);
}

}  // namespace

void DomainParams::validate(int num_classes) const {
  if (palette.size() != static_cast<std::size_t>(num_classes)) {
    throw std::invalid_argument("DomainParams: palette size must equal the category count");
  }
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("DomainParams: noise_sigma must be >= 0");
  if (blur_radius < 0) throw std::invalid_argument("DomainParams: blur_radius must be >= 0");
  if (!std::isfinite(hue_shift) || !std::isfinite(brightness)) {
    throw std::invalid_argument("DomainParams: non-finite shift");
  }
}

std::vector<Rgb> default_palette(int num_classes) {
  // Grey background, then two opposite hues at two saturation levels and two
  // in-between hues. Saturation is untouched by the domain shift.
  static const Hsv kBase[] = {
      {0.00, 0.00, 0.55},  // background
      {0.00, 0.85, 0.85},  {0.50, 0.85, 0.85}, {0.00, 0.45, 0.85},
      {0.50, 0.45, 0.85},  {0.25, 0.85, 0.85}, {0.75, 0.85, 0.85},
  };
  std::vector<Rgb> p;
  for (int c = 0; c < num_classes; ++c) {
    if (c < 7) {
      p.push_back(to_rgb(kBase[c]));
    } else {
      p.push_back(to_rgb({std::fmod(0.618033988749895 * c, 1.0), 0.6, 0.4 + 0.1 * (c % 4)}));
    }
  }
  return p;
}

DomainParams source_domain(int num_classes) {
  DomainParams dp;
  dp.palette = default_palette(num_classes);
  return dp;
}

DomainParams large_gap_domain(int num_classes) {
  DomainParams dp = source_domain(num_classes);
  dp.hue_shift = 0.15;
  dp.brightness = -0.2;
  dp.noise_sigma = 0.08;
  dp.blur_radius = 1;
  return dp;
}

void BenchmarkSpec::validate() const {
  if (H < 8 || W < 8) throw std::invalid_argument("BenchmarkSpec: H and W must be >= 8");
  if (C < 2 || C > 255) throw std::invalid_argument("BenchmarkSpec: C must be in [2, 255]");
  if (class_rarity.size() != static_cast<std::size_t>(C)) {
    throw std::invalid_argument("BenchmarkSpec: class_rarity must have C entries");
  }
  for (double r : class_rarity) {
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("BenchmarkSpec: rarity entries must be in (0, 1]");
  }
  if (n_source < 0 || n_target < 0 || n_val < 0) throw std::invalid_argument("BenchmarkSpec: negative size");
}

Grid Scene::image() const {
  Grid g(h, w, 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) g.v[i] = rgb[i] / 255.0;
  return g;
}

Scene generate_scene(const BenchmarkSpec& spec, const DomainParams& dp, std::uint64_t index) {
  spec.validate();
  dp.validate(spec.C);
  const int H = spec.H, W = spec.W;
  const Geometry g = make_geometry(spec, index);

  std::vector<Hsv> base(dp.palette.size());
  for (std::size_t c = 0; c < base.size(); ++c) base[c] = to_hsv(dp.palette[c]);

  std::vector<double> img(static_cast<std::size_t>(H) * W * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      Hsv bg = base[0];
      bg.v += g.texture.at(y, x);
      const Rgb c = render_color(dp, bg);
      double* o = &img[(static_cast<std::size_t>(y) * W + x) * 3];
      o[0] = c.r, o[1] = c.g, o[2] = c.b;
    }
  for (const auto& s : g.shapes) {
    Hsv h = base[s.cls];
    h.h += s.dh;
    h.s += s.ds;
    h.v += s.dv;
    const Rgb c = render_color(dp, h);
    for (int p : s.pixels) {
      double* o = &img[static_cast<std::size_t>(p) * 3];
      o[0] = c.r, o[1] = c.g, o[2] = c.b;
    }
  }

  box_blur(img, H, W, dp.blur_radius);
  if (dp.noise_sigma > 0.0) {
    Rng noise(derive_seed(spec.seed, {index, 0x4E4F495345ULL}));
    for (auto& v : img) v += dp.noise_sigma * noise.normal();
  }

  Scene s;
  s.h = H;
  s.w = W;
  s.rgb.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    s.rgb[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img[i], 0.0, 1.0) * 255.0));
  }
  s.mask = g.mask;
  return s;
}

WeakLabel weak_from_mask(const LabelMap& Y, int num_classes) {
  WeakLabel y(num_classes, 0);
  for (auto v : Y.v) {
    if (v >= num_classes) throw std::invalid_argument("weak_from_mask: mask class index out of range");
    y[v] = 1;
  }
  return y;
}

PointLabelSet points_from_mask(const LabelMap& Y, int num_classes, std::uint64_t seed) {
  return n_points_from_mask(Y, num_classes, 1, seed);
}

PointLabelSet n_points_from_mask(const LabelMap& Y, int num_classes, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n_points_from_mask: n must be >= 1");
  std::vector<std::vector<int>> regions(num_classes);
  for (std::size_t p = 0; p < Y.v.size(); ++p) {
    if (Y.v[p] >= num_classes) throw std::invalid_argument("n_points_from_mask: mask class index out of range");
    regions[Y.v[p]].push_back(static_cast<int>(p));
  }
  PointLabelSet out;
  for (int c = 0; c < num_classes; ++c) {
    auto& px = regions[c];
    if (px.empty()) continue;
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
    const int take = std::min<int>(n, static_cast<int>(px.size()));
    // Partial Fisher-Yates: the first `take` slots become a uniform sample.
    for (int i = 0; i < take; ++i) {
      const int j = i + rng.below(static_cast<int>(px.size()) - i);
      std::swap(px[i], px[j]);
      out.push_back({px[i] / Y.w, px[i] % Y.w, c});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

const char* split_name(Split s) {
  switch (s) {
    case Split::source: return "source";
    case Split::target: return "target";
    case Split::source_val: return "source_val";
    case Split::target_val: return "target_val";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  for (Split s : {Split::source, Split::target, Split::source_val, Split::target_val}) {
    if (name == split_name(s)) return s;
  }
  throw std::invalid_argument("unknown split '" + name + "'");
}

std::uint64_t split_offset(Split s) {
  switch (s) {
    case Split::source: return 0;
    case Split::target: return 1'000'000;
    case Split::source_val: return 2'000'000;
    case Split::target_val: return 3'000'000;
  }
  return 0;
}

const std::vector<Scene>& Dataset::split(Split s) const {
  switch (s) {
    case Split::source: return source;
    case Split::target: return target;
    case Split::source_val: return source_val;
    case Split::target_val: return target_val;
  }
  return source;
}

std::vector<Scene>& Dataset::split(Split s) {
  return const_cast<std::vector<Scene>&>(std::as_const(*this).split(s));
}

Dataset make_dataset(const BenchmarkSpec& spec, const DomainParams& source_dp,
                     const DomainParams& target_dp) {
  spec.validate();
  Dataset ds{spec, source_dp, target_dp, {}, {}, {}, {}};
  auto fill = [&](std::vector<Scene>& out, Split s, int n, const DomainParams& dp) {
    out.resize(n);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) out[i] = generate_scene(spec, dp, split_offset(s) + i);
  };
  fill(ds.source, Split::source, spec.n_source, source_dp);
  fill(ds.target, Split::target, spec.n_target, target_dp);
  fill(ds.source_val, Split::source_val, spec.n_val, source_dp);
  fill(ds.target_val, Split::target_val, spec.n_val, target_dp);
  return ds;
}

BatchView make_batch(const std::vector<Scene>& scenes, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const auto& first = scenes.at(indices[0]);
  BatchView b{Tensor(static_cast<int>(indices.size()), first.h, first.w, 3), {}, indices};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = scenes.at(indices[i]);
    if (s.h != first.h || s.w != first.w) throw std::invalid_argument("make_batch: mixed scene sizes");
    auto dst = b.X.image_span(static_cast<int>(i));
    for (std::size_t k = 0; k < s.rgb.size(); ++k) dst[k] = s.rgb[k] / 255.0;
    b.Y.push_back(s.mask);
  }
  return b;
}

}  // namespace wdaseg::synth
