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

#include <cstdint>
#include <vector>

#include "wdaseg/params.hpp"

namespace wdaseg {

/// v = momentum * v + g; theta -= lr * v.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}
  void step(ParamSet& ps, double lr);

 private:
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

/// Adaptive-moment optimizer with a per-array step count. Arrays whose
/// `active` flag is false are left untouched, moments included.
/// Rescales all gradients so their joint L2 norm is at most max_norm and
/// returns the norm before rescaling. Gradients are untouched when the norm is
/// already within bounds.
double clip_grad_norm(ParamSet& ps, double max_norm);

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamSet& ps, double lr, const std::vector<bool>* active = nullptr);

 private:
  double beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<std::int64_t> t_;
};

}  // namespace wdaseg
