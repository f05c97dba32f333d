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

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wdaseg/kernels.hpp"

namespace wdaseg::kernels::detail {

inline void check_conv_args(const Tensor& x, std::span<const double> w, std::span<const double> b,
                            const ConvShape& s, const char* what) {
  if (s.kernel < 1 || s.kernel % 2 == 0 || s.stride < 1 || s.in_c < 1 || s.out_c < 1) {
    throw std::invalid_argument(std::string(what) + ": invalid conv shape");
  }
  if (x.c != s.in_c) throw std::invalid_argument(std::string(what) + ": input channel mismatch");
  if (w.size() != s.weight_count()) throw std::invalid_argument(std::string(what) + ": weight size mismatch");
  if (b.size() != static_cast<std::size_t>(s.out_c)) {
    throw std::invalid_argument(std::string(what) + ": bias size mismatch");
  }
}

struct Tap {
  int i0 = 0;
  int i1 = 0;
  double w0 = 1.0;
  double w1 = 0.0;
};

// Source taps for each output index of a 1-D bilinear upsample with half-pixel
// centres: src = (o + 0.5) / factor - 0.5, clamped at the low edge.
inline std::vector<Tap> bilinear_taps(int in, int factor) {
  if (in < 1 || factor < 1) throw std::invalid_argument("bilinear upsample: invalid extent or factor");
  std::vector<Tap> taps(static_cast<std::size_t>(in) * factor);
  for (int o = 0; o < in * factor; ++o) {
    double src = (o + 0.5) / factor - 0.5;
    if (src < 0.0) src = 0.0;
    Tap t;
    t.i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    t.i1 = std::min(t.i0 + 1, in - 1);
    t.w1 = src - t.i0;
    t.w0 = 1.0 - t.w1;
    taps[o] = t;
  }
  return taps;
}

}  // namespace wdaseg::kernels::detail
