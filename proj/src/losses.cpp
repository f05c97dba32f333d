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

#include "wdaseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace wdaseg::losses {
namespace {

void require_finite(const Grid& g, const char* what) {
  for (double x : g.v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}

void require_nonempty(const Grid& g, const char* what) {
  if (g.h < 1 || g.w < 1 || g.c < 1) throw std::invalid_argument(std::string(what) + ": empty grid");
}

void require_label(const WeakLabel& y, std::size_t n, const char* what) {
  if (y.size() != n) throw std::invalid_argument(std::string(what) + ": length mismatch");
  for (auto v : y) {
    if (v > 1) throw std::invalid_argument(std::string(what) + ": weak label entries must be 0 or 1");
  }
}

// Rejects values that are not a probability at all; in-range values are then clamped.
double guarded_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string(what) + ": probability outside [0, 1]");
  }
  return clamp_prob(p);
}

// d/dp of -log(clamp(p)); zero where the clamp is active.
double dneglog(double p) {
  if (p < kProbEps || p > 1.0 - kProbEps) return 0.0;
  return -1.0 / p;
}

double dneglog1m(double p) {
  if (p < kProbEps || p > 1.0 - kProbEps) return 0.0;
  return 1.0 / (1.0 - p);
}

}  // namespace

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

void LossWeights::validate() const {
  if (!(lambda_c >= 0.0)) throw std::invalid_argument("lambda_c must be >= 0");
  if (!(lambda_adv >= 0.0)) throw std::invalid_argument("lambda_adv must be >= 0");
  if (!(lambda_out >= 0.0)) throw std::invalid_argument("lambda_out must be >= 0");
  if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("k must be > 0");
  if (!(T >= 0.0 && T <= 1.0)) throw std::invalid_argument("T must be in [0, 1]");
}

SmoothMax smooth_max_pool(const PredictionMap& A, double k) {
  require_nonempty(A, "smooth_max_pool");
  require_finite(A, "smooth_max_pool");
  if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("smooth_max_pool: k must be > 0");

  const std::size_t P = A.pixels();
  SmoothMax out;
  out.inner.assign(A.c, 0.0);
  out.prob.assign(A.c, 0.0);
  for (int c = 0; c < A.c; ++c) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < P; ++p) m = std::max(m, A.v[p * A.c + c]);
    double s = 0.0;
    for (std::size_t p = 0; p < P; ++p) s += std::exp(k * (A.v[p * A.c + c] - m));
    const double inner = m + std::log(s / static_cast<double>(P)) / k;
    out.inner[c] = inner;
    out.prob[c] = 1.0 / (1.0 + std::exp(-inner));
  }
  return out;
}

PredictionMap smooth_max_pool_backward(const PredictionMap& A, double k, const SmoothMax& fwd,
                                       std::span<const double> dprob) {
  if (dprob.size() != static_cast<std::size_t>(A.c)) {
    throw std::invalid_argument("smooth_max_pool_backward: gradient length mismatch");
  }
  const std::size_t P = A.pixels();
  PredictionMap dA(A.h, A.w, A.c);
  for (int c = 0; c < A.c; ++c) {
    const double p = fwd.prob[c];
    const double dinner = dprob[c] * p * (1.0 - p);
    if (dinner == 0.0) continue;
    // d inner / dA = spatial softmax of k*A.
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < P; ++i) m = std::max(m, A.v[i * A.c + c]);
    double s = 0.0;
    for (std::size_t i = 0; i < P; ++i) s += std::exp(k * (A.v[i * A.c + c] - m));
    for (std::size_t i = 0; i < P; ++i) {
      dA.v[i * A.c + c] = dinner * std::exp(k * (A.v[i * A.c + c] - m)) / s;
    }
  }
  return dA;
}

VecLoss weak_label_bce(std::span<const double> p, const WeakLabel& y) {
  require_label(y, p.size(), "weak_label_bce");
  VecLoss out;
  out.grad.assign(p.size(), 0.0);
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double pc = guarded_prob(p[c], "weak_label_bce");
    if (y[c]) {
      out.value -= std::log(pc);
      out.grad[c] = dneglog(p[c]);
    } else {
      out.value -= std::log1p(-pc);
      out.grad[c] = dneglog1m(p[c]);
    }
  }
  return out;
}

Grid spatial_softmax(const PredictionMap& A) {
  require_nonempty(A, "spatial_softmax");
  require_finite(A, "spatial_softmax");
  const std::size_t P = A.pixels();
  Grid s(A.h, A.w, A.c);
  for (int c = 0; c < A.c; ++c) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < P; ++p) m = std::max(m, A.v[p * A.c + c]);
    double z = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      const double e = std::exp(A.v[p * A.c + c] - m);
      s.v[p * A.c + c] = e;
      z += e;
    }
    for (std::size_t p = 0; p < P; ++p) s.v[p * A.c + c] /= z;
  }
  return s;
}

CategoryFeatures category_pool(const FeatureGrid& F, const PredictionMap& A) {
  if (F.h != A.h || F.w != A.w) throw std::invalid_argument("category_pool: spatial shape mismatch");
  require_nonempty(F, "category_pool");
  const Grid s = spatial_softmax(A);
  const std::size_t P = F.pixels();
  CategoryFeatures out(A.c, F.c);
  for (std::size_t p = 0; p < P; ++p) {
    const auto f = F.pixel(p);
    for (int c = 0; c < A.c; ++c) {
      const double a = s.v[p * A.c + c];
      auto row = out.row(c);
      for (int d = 0; d < F.c; ++d) row[d] += a * f[d];
    }
  }
  return out;
}

PoolGrad category_pool_backward(const FeatureGrid& F, const PredictionMap& A,
                                const CategoryFeatures& dpooled) {
  if (F.h != A.h || F.w != A.w) throw std::invalid_argument("category_pool_backward: spatial shape mismatch");
  if (dpooled.classes != A.c || dpooled.dim != F.c) {
    throw std::invalid_argument("category_pool_backward: gradient shape mismatch");
  }
  const Grid s = spatial_softmax(A);
  const std::size_t P = F.pixels();
  PoolGrad g{FeatureGrid(F.h, F.w, F.c), PredictionMap(A.h, A.w, A.c)};

  // ds[p, c] = <F[p], dpooled[c]>
  Grid ds(A.h, A.w, A.c);
  for (std::size_t p = 0; p < P; ++p) {
    const auto f = F.pixel(p);
    auto df = g.dF.pixel(p);
    for (int c = 0; c < A.c; ++c) {
      const auto row = dpooled.row(c);
      const double a = s.v[p * A.c + c];
      double dot = 0.0;
      for (int d = 0; d < F.c; ++d) {
        dot += f[d] * row[d];
        df[d] += a * row[d];
      }
      ds.v[p * A.c + c] = dot;
    }
  }
  // Softmax Jacobian over the spatial axis.
  for (int c = 0; c < A.c; ++c) {
    double inner = 0.0;
    for (std::size_t p = 0; p < P; ++p) inner += s.v[p * A.c + c] * ds.v[p * A.c + c];
    for (std::size_t p = 0; p < P; ++p) {
      g.dA.v[p * A.c + c] = s.v[p * A.c + c] * (ds.v[p * A.c + c] - inner);
    }
  }
  return g;
}

DomainLoss discriminator_domain_loss(std::span<const double> ds, std::span<const double> dt,
                                     const WeakLabel& ys, const WeakLabel& yt) {
  if (ds.size() != dt.size()) throw std::invalid_argument("discriminator_domain_loss: length mismatch");
  require_label(ys, ds.size(), "discriminator_domain_loss");
  require_label(yt, dt.size(), "discriminator_domain_loss");
  DomainLoss out;
  out.d_source.assign(ds.size(), 0.0);
  out.d_target.assign(dt.size(), 0.0);
  for (std::size_t c = 0; c < ds.size(); ++c) {
    const double s = guarded_prob(ds[c], "discriminator_domain_loss");
    const double t = guarded_prob(dt[c], "discriminator_domain_loss");
    if (ys[c]) {
      out.value -= std::log(s);
      out.d_source[c] = dneglog(ds[c]);
    }
    if (yt[c]) {
      out.value -= std::log1p(-t);
      out.d_target[c] = dneglog1m(dt[c]);
    }
  }
  return out;
}

VecLoss adversarial_loss(std::span<const double> dt, const WeakLabel& yt) {
  require_label(yt, dt.size(), "adversarial_loss");
  VecLoss out;
  out.grad.assign(dt.size(), 0.0);
  for (std::size_t c = 0; c < dt.size(); ++c) {
    const double t = guarded_prob(dt[c], "adversarial_loss");
    if (yt[c]) {
      out.value -= std::log(t);
      out.grad[c] = dneglog(dt[c]);
    }
  }
  return out;
}

MapLoss segmentation_ce(const OutputMap& O, const LabelMap& Y) {
  if (O.h != Y.h || O.w != Y.w) throw std::invalid_argument("segmentation_ce: shape mismatch");
  if (O.pixels() == 0) throw std::invalid_argument("segmentation_ce: empty map");
  MapLoss out{0.0, Grid(O.h, O.w, O.c)};
  const double inv = 1.0 / static_cast<double>(O.pixels());
  for (std::size_t p = 0; p < O.pixels(); ++p) {
    const int y = Y.v[p];
    if (y >= O.c) throw std::invalid_argument("segmentation_ce: mask class index out of range");
    const double o = O.v[p * O.c + y];
    out.value -= std::log(guarded_prob(o, "segmentation_ce"));
    out.grad.v[p * O.c + y] = dneglog(o) * inv;
  }
  out.value *= inv;
  return out;
}

MapLoss point_loss(const OutputMap& O, const PointLabelSet& points) {
  MapLoss out{0.0, Grid(O.h, O.w, O.c)};
  for (const auto& pt : points) {
    if (pt.row < 0 || pt.row >= O.h || pt.col < 0 || pt.col >= O.w || pt.category < 0 ||
        pt.category >= O.c) {
      throw std::invalid_argument("point_loss: point out of bounds");
    }
    const double o = O.at(pt.row, pt.col, pt.category);
    out.value -= std::log(guarded_prob(o, "point_loss"));
    out.grad.at(pt.row, pt.col, pt.category) += dneglog(o);
  }
  return out;
}

WeakLabel pseudo_weak_labels(std::span<const double> p, double T) {
  if (!(T >= 0.0 && T <= 1.0)) throw std::invalid_argument("pseudo_weak_labels: T must be in [0, 1]");
  WeakLabel y(p.size(), 0);
  for (std::size_t c = 0; c < p.size(); ++c) y[c] = p[c] > T ? 1 : 0;
  return y;
}

double joint_g_loss(double Ls, double Lc, double Ladv, double Lout, const LossWeights& w) {
  return Ls + w.lambda_c * Lc + w.lambda_adv * Ladv + w.lambda_out * Lout;
}

}  // namespace wdaseg::losses
