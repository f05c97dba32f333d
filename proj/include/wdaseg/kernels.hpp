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

// Dense batch kernels used by the networks.
//
// wdaseg::kernels holds the OpenMP versions used in training. Each output
// element is produced by exactly one thread with a fixed summation order, so
// results do not depend on the thread count. wdaseg::kernels::reference holds
// plain serial loops with the same signatures; tests compare the two.
//
// Convolution weights are stored (kernel_h, kernel_w, in_c, out_c), i.e. a
// K x out_c matrix with K = kernel * kernel * in_c. Padding is kernel / 2.

#include <span>

#include "wdaseg/tensor.hpp"

namespace wdaseg::kernels {

struct ConvShape {
  int in_c = 0;
  int out_c = 0;
  int kernel = 3;
  int stride = 1;

  int pad() const { return kernel / 2; }
  int patch() const { return kernel * kernel * in_c; }
  int out_extent(int in) const { return (in + 2 * pad() - kernel) / stride + 1; }
  std::size_t weight_count() const { return static_cast<std::size_t>(patch()) * out_c; }
};

/// y = conv(x, w) + b. y is resized as needed.
void conv_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                  const ConvShape& s, Tensor& y);

/// Accumulates dL/dw and dL/db; writes dL/dx when dx is non-null.
void conv_backward(const Tensor& x, const Tensor& dy, std::span<const double> w, const ConvShape& s,
                   std::span<double> dw, std::span<double> db, Tensor* dx);

void relu_forward(Tensor& x, double negative_slope = 0.0);
/// dy *= (y > 0 ? 1 : slope), with y the post-activation value.
void relu_backward(const Tensor& y, Tensor& dy, double negative_slope = 0.0);

/// Bilinear upsampling by an integer factor (half-pixel centres, edge clamp).
void upsample_bilinear(const Tensor& a, int factor, Tensor& out);
void upsample_bilinear_backward(const Tensor& dout, int factor, Tensor& da);

/// Softmax over the channel axis, in place.
void softmax_channels(Tensor& z);
/// dz = o * (do - <o, do>) per pixel.
void softmax_channels_backward(const Tensor& o, const Tensor& dout, Tensor& dz);

/// Non-overlapping average pooling by an integer factor.
void avgpool(const Tensor& x, int factor, Tensor& out);
void avgpool_backward(const Tensor& dout, int factor, Tensor& dx);

namespace reference {

void conv_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                  const ConvShape& s, Tensor& y);
void conv_backward(const Tensor& x, const Tensor& dy, std::span<const double> w, const ConvShape& s,
                   std::span<double> dw, std::span<double> db, Tensor* dx);
void upsample_bilinear(const Tensor& a, int factor, Tensor& out);
void upsample_bilinear_backward(const Tensor& dout, int factor, Tensor& da);
void softmax_channels(Tensor& z);

}  // namespace reference
}  // namespace wdaseg::kernels
