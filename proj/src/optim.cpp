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

#include "wdaseg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace wdaseg {

void SgdMomentum::step(ParamSet& ps, double lr) {
  auto& params = ps.all();
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.value.size(), 0.0);
  }
  if (velocity_.size() != params.size()) throw std::logic_error("SgdMomentum: parameter set changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      v[j] = momentum_ * v[j] + p.grad[j];
      p.value[j] -= lr * v[j];
    }
  }
}

double clip_grad_norm(ParamSet& ps, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_grad_norm: max_norm must be > 0");
  double sq = 0.0;
  for (const auto& p : ps.all()) {
    for (double g : p.grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : ps.all()) {
      for (double& g : p.grad) g *= s;
    }
  }
  return norm;
}

void Adam::step(ParamSet& ps, double lr, const std::vector<bool>* active) {
  auto& params = ps.all();
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
      t_.push_back(0);
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("Adam: parameter set changed");
  if (active != nullptr && active->size() != params.size()) {
    throw std::invalid_argument("Adam: active mask size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (active != nullptr && !(*active)[i]) continue;
    auto& p = params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    const auto t = ++t_[i];
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      p.value[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

}  // namespace wdaseg
