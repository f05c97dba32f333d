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

// Serial direct-loop versions of the batch kernels. Kept for tests and the
// benchmark; training never calls these.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kernels_detail.hpp"
#include "wdaseg/kernels.hpp"

namespace wdaseg::kernels::reference {

void conv_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                  const ConvShape& s, Tensor& y) {
  detail::check_conv_args(x, w, b, s, "reference::conv_forward");
  const int oh = s.out_extent(x.h);
  const int ow = s.out_extent(x.w);
  y = Tensor(x.n, oh, ow, s.out_c);
  const int pad = s.pad();
  for (int bi = 0; bi < x.n; ++bi)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int co = 0; co < s.out_c; ++co) {
          double acc = b[co];
          for (int ky = 0; ky < s.kernel; ++ky)
            for (int kx = 0; kx < s.kernel; ++kx) {
              const int iy = oy * s.stride + ky - pad;
              const int ix = ox * s.stride + kx - pad;
              if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
              for (int ci = 0; ci < s.in_c; ++ci) {
                const std::size_t k = (static_cast<std::size_t>(ky) * s.kernel + kx) * s.in_c + ci;
                acc += x.at(bi, iy, ix, ci) * w[k * s.out_c + co];
              }
            }
          y.at(bi, oy, ox, co) = acc;
        }
}

void conv_backward(const Tensor& x, const Tensor& dy, std::span<const double> w, const ConvShape& s,
                   std::span<double> dw, std::span<double> db, Tensor* dx) {
  detail::check_conv_args(x, w, std::span<const double>(db.data(), db.size()), s,
                          "reference::conv_backward");
  const int oh = s.out_extent(x.h);
  const int ow = s.out_extent(x.w);
  if (dy.n != x.n || dy.h != oh || dy.w != ow || dy.c != s.out_c) {
    throw std::invalid_argument("reference::conv_backward: dy shape mismatch");
  }
  if (dx != nullptr) *dx = Tensor(x.n, x.h, x.w, x.c);
  const int pad = s.pad();
  for (int bi = 0; bi < x.n; ++bi)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int co = 0; co < s.out_c; ++co) {
          const double g = dy.at(bi, oy, ox, co);
          db[co] += g;
          for (int ky = 0; ky < s.kernel; ++ky)
            for (int kx = 0; kx < s.kernel; ++kx) {
              const int iy = oy * s.stride + ky - pad;
              const int ix = ox * s.stride + kx - pad;
              if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
              for (int ci = 0; ci < s.in_c; ++ci) {
                const std::size_t k = (static_cast<std::size_t>(ky) * s.kernel + kx) * s.in_c + ci;
                dw[k * s.out_c + co] += x.at(bi, iy, ix, ci) * g;
                if (dx != nullptr) dx->at(bi, iy, ix, ci) += w[k * s.out_c + co] * g;
              }
            }
        }
}

void upsample_bilinear(const Tensor& a, int factor, Tensor& out) {
  const auto ty = detail::bilinear_taps(a.h, factor);
  const auto tx = detail::bilinear_taps(a.w, factor);
  out = Tensor(a.n, a.h * factor, a.w * factor, a.c);
  for (int bi = 0; bi < a.n; ++bi)
    for (int oy = 0; oy < out.h; ++oy)
      for (int ox = 0; ox < out.w; ++ox)
        for (int k = 0; k < a.c; ++k) {
          const auto& vy = ty[oy];
          const auto& vx = tx[ox];
          out.at(bi, oy, ox, k) = vy.w0 * (vx.w0 * a.at(bi, vy.i0, vx.i0, k) + vx.w1 * a.at(bi, vy.i0, vx.i1, k)) +
                                  vy.w1 * (vx.w0 * a.at(bi, vy.i1, vx.i0, k) + vx.w1 * a.at(bi, vy.i1, vx.i1, k));
        }
}

void upsample_bilinear_backward(const Tensor& dout, int factor, Tensor& da) {
  const int ih = dout.h / factor;
  const int iw = dout.w / factor;
  const auto ty = detail::bilinear_taps(ih, factor);
  const auto tx = detail::bilinear_taps(iw, factor);
  da = Tensor(dout.n, ih, iw, dout.c);
  for (int bi = 0; bi < dout.n; ++bi)
    for (int oy = 0; oy < dout.h; ++oy)
      for (int ox = 0; ox < dout.w; ++ox)
        for (int k = 0; k < dout.c; ++k) {
          const auto& vy = ty[oy];
          const auto& vx = tx[ox];
          const double g = dout.at(bi, oy, ox, k);
          da.at(bi, vy.i0, vx.i0, k) += vy.w0 * vx.w0 * g;
          da.at(bi, vy.i0, vx.i1, k) += vy.w0 * vx.w1 * g;
          da.at(bi, vy.i1, vx.i0, k) += vy.w1 * vx.w0 * g;
          da.at(bi, vy.i1, vx.i1, k) += vy.w1 * vx.w1 * g;
        }
}

void softmax_channels(Tensor& z) {
  for (int bi = 0; bi < z.n; ++bi)
    for (int y = 0; y < z.h; ++y)
      for (int x = 0; x < z.w; ++x) {
        double m = z.at(bi, y, x, 0);
        for (int k = 1; k < z.c; ++k) m = std::max(m, z.at(bi, y, x, k));
        double s = 0.0;
        for (int k = 0; k < z.c; ++k) s += std::exp(z.at(bi, y, x, k) - m);
        for (int k = 0; k < z.c; ++k) z.at(bi, y, x, k) = std::exp(z.at(bi, y, x, k) - m) / s;
      }
}

}  // namespace wdaseg::kernels::reference
