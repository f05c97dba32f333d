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

#include "wdaseg/params.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace wdaseg {

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Param& ParamSet::add(std::string name, std::vector<int> shape) {
  if (contains(name)) throw std::invalid_argument("ParamSet::add: duplicate name " + name);
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  Param p{std::move(name), std::move(shape), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamSet::operator[](std::string_view name) {
  auto it = std::find_if(params_.begin(), params_.end(), [&](const Param& p) { return p.name == name; });
  if (it == params_.end()) throw std::out_of_range("ParamSet: no parameter named " + std::string(name));
  return *it;
}

const Param& ParamSet::operator[](std::string_view name) const {
  auto it = std::find_if(params_.begin(), params_.end(), [&](const Param& p) { return p.name == name; });
  if (it == params_.end()) throw std::out_of_range("ParamSet: no parameter named " + std::string(name));
  return *it;
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Param& p) { return p.name == name; });
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  for (const auto& p : params_) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = fnv1a({reinterpret_cast<const unsigned char*>(p.value.data()), p.value.size() * sizeof(double)}, h);
  }
  return h;
}

bool ParamSet::values_equal(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i].value;
    const auto& b = other.params_[i].value;
    if (a.size() != b.size()) return false;
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace wdaseg
