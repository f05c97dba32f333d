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

#include "wdaseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "kernels_detail.hpp"

namespace wdaseg::kernels {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Gathers the receptive field of output position (oy, ox) of image b into patch.
inline void gather_patch(const Tensor& x, const ConvShape& s, int b, int oy, int ox, double* patch) {
  const int pad = s.pad();
  double* dst = patch;
  for (int ky = 0; ky < s.kernel; ++ky) {
    const int iy = oy * s.stride + ky - pad;
    for (int kx = 0; kx < s.kernel; ++kx) {
      const int ix = ox * s.stride + kx - pad;
      if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) {
        std::fill(dst, dst + s.in_c, 0.0);
      } else {
        const double* src = x.v.data() + x.index(b, iy, ix, 0);
        std::copy(src, src + s.in_c, dst);
      }
      dst += s.in_c;
    }
  }
}

// im2col of one image into cols (oh*ow x K).
void im2col(const Tensor& x, const ConvShape& s, int b, int oh, int ow, double* cols) {
  const int K = s.patch();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) gather_patch(x, s, b, oy, ox, cols + (static_cast<std::size_t>(oy) * ow + ox) * K);
  }
}

inline bool is_pointwise(const ConvShape& s) { return s.kernel == 1 && s.stride == 1; }

// Per-thread im2col buffer; grows, never shrinks, never re-zeroed.
double* scratch(std::size_t n) {
  thread_local std::vector<double> buf;
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

// Rows of the weight gradient handled as one unit; fixed so that the result
// does not depend on the thread count.
constexpr int kWeightChunk = 32;

}  // namespace

void conv_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                  const ConvShape& s, Tensor& y) {
  detail::check_conv_args(x, w, b, s, "conv_forward");
  const int oh = s.out_extent(x.h);
  const int ow = s.out_extent(x.w);
  if (y.n != x.n || y.h != oh || y.w != ow || y.c != s.out_c) y = Tensor(x.n, oh, ow, s.out_c);

  const int P = oh * ow;
  const int K = s.patch();
  const int OC = s.out_c;
  const bool pointwise = is_pointwise(s);
  const ConstMatMap W(w.data(), K, OC);
  const Eigen::Map<const Eigen::RowVectorXd> bias(b.data(), OC);

#pragma omp parallel
  {
    double* cols = pointwise ? nullptr : scratch(static_cast<std::size_t>(P) * K);
#pragma omp for schedule(static)
    for (int bi = 0; bi < x.n; ++bi) {
      const double* in = x.v.data() + static_cast<std::size_t>(bi) * x.image_size();
      if (!pointwise) {
        im2col(x, s, bi, oh, ow, cols);
        in = cols;
      }
      MatMap Y(y.v.data() + static_cast<std::size_t>(bi) * y.image_size(), P, OC);
      Y.noalias() = ConstMatMap(in, P, K) * W;
      Y.rowwise() += bias;
    }
  }
}

void conv_backward(const Tensor& x, const Tensor& dy, std::span<const double> w, const ConvShape& s,
                   std::span<double> dw, std::span<double> db, Tensor* dx) {
  detail::check_conv_args(x, w, std::span<const double>(db.data(), db.size()), s, "conv_backward");
  const int oh = s.out_extent(x.h);
  const int ow = s.out_extent(x.w);
  if (dy.n != x.n || dy.h != oh || dy.w != ow || dy.c != s.out_c) {
    throw std::invalid_argument("conv_backward: dy shape mismatch");
  }
  if (dw.size() != s.weight_count()) throw std::invalid_argument("conv_backward: dw size mismatch");

  const long rows = static_cast<long>(x.n) * oh * ow;
  const int P = oh * ow;
  const int K = s.patch();
  const int OC = s.out_c;
  const bool pointwise = is_pointwise(s);

  // im2col for the whole batch, unless it is the input itself.
  const double* cols = x.v.data();
  if (!pointwise) {
    double* buf = scratch(static_cast<std::size_t>(rows) * K);
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < x.n; ++bi) im2col(x, s, bi, oh, ow, buf + static_cast<std::size_t>(bi) * P * K);
    cols = buf;
  }

  // dw += cols^T dy, one fixed block of weight rows per task.
  const ConstMatMap G(dy.v.data(), rows, OC);
  const int nchunks = (K + kWeightChunk - 1) / kWeightChunk;
#pragma omp parallel for schedule(static)
  for (int kc = 0; kc < nchunks; ++kc) {
    const int k0 = kc * kWeightChunk;
    const int kn = std::min(K, k0 + kWeightChunk) - k0;
    const Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> C(cols + k0, rows, kn, Eigen::OuterStride<>(K));
    MatMap(dw.data() + static_cast<std::size_t>(k0) * OC, kn, OC).noalias() += C.transpose() * G;
  }

#pragma omp parallel for schedule(static)
  for (int co = 0; co < OC; ++co) {
    double acc = 0.0;
    for (long r = 0; r < rows; ++r) acc += dy.v[static_cast<std::size_t>(r) * OC + co];
    db[co] += acc;
  }

  if (dx == nullptr) return;
  if (!dx->same_shape(x)) *dx = Tensor(x.n, x.h, x.w, x.c);
  const ConstMatMap W(w.data(), K, OC);
  if (pointwise) {
    MatMap(dx->v.data(), rows, K).noalias() = G * W.transpose();
    return;
  }
  std::fill(dx->v.begin(), dx->v.end(), 0.0);

  const int pad = s.pad();
  // One image per thread; scatter order inside an image is fixed.
#pragma omp parallel
  {
    RowMat dcols(P, K);
#pragma omp for schedule(static)
    for (int bi = 0; bi < x.n; ++bi) {
      dcols.noalias() = ConstMatMap(dy.v.data() + static_cast<std::size_t>(bi) * dy.image_size(), P, OC) * W.transpose();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double* src = dcols.data() + (static_cast<std::size_t>(oy) * ow + ox) * K;
          for (int ky = 0; ky < s.kernel; ++ky) {
            const int iy = oy * s.stride + ky - pad;
            for (int kx = 0; kx < s.kernel; ++kx) {
              const int ix = ox * s.stride + kx - pad;
              if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) {
                double* d = dx->v.data() + dx->index(bi, iy, ix, 0);
                for (int ci = 0; ci < s.in_c; ++ci) d[ci] += src[ci];
              }
              src += s.in_c;
            }
          }
        }
      }
    }
  }
}

void relu_forward(Tensor& x, double negative_slope) {
  const long n = static_cast<long>(x.v.size());
  double* v = x.v.data();
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : negative_slope * v[i];
}

void relu_backward(const Tensor& y, Tensor& dy, double negative_slope) {
  if (y.v.size() != dy.v.size()) throw std::invalid_argument("relu_backward: size mismatch");
  const long n = static_cast<long>(y.v.size());
  const double* yv = y.v.data();
  double* g = dy.v.data();
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) g[i] = yv[i] > 0.0 ? g[i] : negative_slope * g[i];
}

void upsample_bilinear(const Tensor& a, int factor, Tensor& out) {
  const auto ty = detail::bilinear_taps(a.h, factor);
  const auto tx = detail::bilinear_taps(a.w, factor);
  const int oh = a.h * factor;
  const int ow = a.w * factor;
  if (out.n != a.n || out.h != oh || out.w != ow || out.c != a.c) out = Tensor(a.n, oh, ow, a.c);
  const int C = a.c;
  const long rows = static_cast<long>(a.n) * oh;
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const int bi = static_cast<int>(r / oh);
    const int oy = static_cast<int>(r % oh);
    const auto& vy = ty[oy];
    for (int ox = 0; ox < ow; ++ox) {
      const auto& vx = tx[ox];
      const double* p00 = a.v.data() + a.index(bi, vy.i0, vx.i0, 0);
      const double* p01 = a.v.data() + a.index(bi, vy.i0, vx.i1, 0);
      const double* p10 = a.v.data() + a.index(bi, vy.i1, vx.i0, 0);
      const double* p11 = a.v.data() + a.index(bi, vy.i1, vx.i1, 0);
      double* o = out.v.data() + out.index(bi, oy, ox, 0);
      const double w00 = vy.w0 * vx.w0, w01 = vy.w0 * vx.w1, w10 = vy.w1 * vx.w0, w11 = vy.w1 * vx.w1;
      for (int k = 0; k < C; ++k) o[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
    }
  }
}

void upsample_bilinear_backward(const Tensor& dout, int factor, Tensor& da) {
  if (dout.h % factor != 0 || dout.w % factor != 0) {
    throw std::invalid_argument("upsample_bilinear_backward: extent not divisible by factor");
  }
  const int ih = dout.h / factor;
  const int iw = dout.w / factor;
  const auto ty = detail::bilinear_taps(ih, factor);
  const auto tx = detail::bilinear_taps(iw, factor);
  if (da.n != dout.n || da.h != ih || da.w != iw || da.c != dout.c) da = Tensor(dout.n, ih, iw, dout.c);
  std::fill(da.v.begin(), da.v.end(), 0.0);
  const int C = dout.c;
#pragma omp parallel for schedule(static)
  for (int bi = 0; bi < dout.n; ++bi) {
    for (int oy = 0; oy < dout.h; ++oy) {
      const auto& vy = ty[oy];
      for (int ox = 0; ox < dout.w; ++ox) {
        const auto& vx = tx[ox];
        const double* g = dout.v.data() + dout.index(bi, oy, ox, 0);
        double* p00 = da.v.data() + da.index(bi, vy.i0, vx.i0, 0);
        double* p01 = da.v.data() + da.index(bi, vy.i0, vx.i1, 0);
        double* p10 = da.v.data() + da.index(bi, vy.i1, vx.i0, 0);
        double* p11 = da.v.data() + da.index(bi, vy.i1, vx.i1, 0);
        const double w00 = vy.w0 * vx.w0, w01 = vy.w0 * vx.w1, w10 = vy.w1 * vx.w0, w11 = vy.w1 * vx.w1;
        for (int k = 0; k < C; ++k) {
          p00[k] += w00 * g[k];
          p01[k] += w01 * g[k];
          p10[k] += w10 * g[k];
          p11[k] += w11 * g[k];
        }
      }
    }
  }
}

void softmax_channels(Tensor& z) {
  const long P = static_cast<long>(z.n) * z.h * z.w;
  const int C = z.c;
#pragma omp parallel for schedule(static)
  for (long p = 0; p < P; ++p) {
    double* v = z.v.data() + static_cast<std::size_t>(p) * C;
    double m = v[0];
    for (int k = 1; k < C; ++k) m = std::max(m, v[k]);
    double s = 0.0;
    for (int k = 0; k < C; ++k) {
      v[k] = std::exp(v[k] - m);
      s += v[k];
    }
    for (int k = 0; k < C; ++k) v[k] /= s;
  }
}

void softmax_channels_backward(const Tensor& o, const Tensor& dout, Tensor& dz) {
  if (!o.same_shape(dout)) throw std::invalid_argument("softmax_channels_backward: shape mismatch");
  if (!dz.same_shape(o)) dz = Tensor(o.n, o.h, o.w, o.c);
  const long P = static_cast<long>(o.n) * o.h * o.w;
  const int C = o.c;
#pragma omp parallel for schedule(static)
  for (long p = 0; p < P; ++p) {
    const double* ov = o.v.data() + static_cast<std::size_t>(p) * C;
    const double* gv = dout.v.data() + static_cast<std::size_t>(p) * C;
    double* d = dz.v.data() + static_cast<std::size_t>(p) * C;
    double inner = 0.0;
    for (int k = 0; k < C; ++k) inner += ov[k] * gv[k];
    for (int k = 0; k < C; ++k) d[k] = ov[k] * (gv[k] - inner);
  }
}

void avgpool(const Tensor& x, int factor, Tensor& out) {
  if (factor < 1 || x.h % factor != 0 || x.w % factor != 0) {
    throw std::invalid_argument("avgpool: extent not divisible by factor");
  }
  const int oh = x.h / factor;
  const int ow = x.w / factor;
  if (out.n != x.n || out.h != oh || out.w != ow || out.c != x.c) out = Tensor(x.n, oh, ow, x.c);
  const double inv = 1.0 / (factor * factor);
  const long rows = static_cast<long>(x.n) * oh;
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const int bi = static_cast<int>(r / oh);
    const int oy = static_cast<int>(r % oh);
    for (int ox = 0; ox < ow; ++ox) {
      double* o = out.v.data() + out.index(bi, oy, ox, 0);
      std::fill(o, o + x.c, 0.0);
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const double* src = x.v.data() + x.index(bi, oy * factor + dy, ox * factor + dx, 0);
          for (int k = 0; k < x.c; ++k) o[k] += src[k];
        }
      }
      for (int k = 0; k < x.c; ++k) o[k] *= inv;
    }
  }
}

void avgpool_backward(const Tensor& dout, int factor, Tensor& dx) {
  const int ih = dout.h * factor;
  const int iw = dout.w * factor;
  if (dx.n != dout.n || dx.h != ih || dx.w != iw || dx.c != dout.c) dx = Tensor(dout.n, ih, iw, dout.c);
  const double inv = 1.0 / (factor * factor);
  const long rows = static_cast<long>(dx.n) * ih;
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const int bi = static_cast<int>(r / ih);
    const int iy = static_cast<int>(r % ih);
    for (int ix = 0; ix < iw; ++ix) {
      const double* g = dout.v.data() + dout.index(bi, iy / factor, ix / factor, 0);
      double* d = dx.v.data() + dx.index(bi, iy, ix, 0);
      for (int k = 0; k < dx.c; ++k) d[k] = g[k] * inv;
    }
  }
}

}  // namespace wdaseg::kernels
