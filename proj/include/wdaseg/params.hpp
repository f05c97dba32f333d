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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wdaseg {

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
};

/// Named parameter arrays of one network, in registration order.
class ParamSet {
 public:
  Param& add(std::string name, std::vector<int> shape);

  Param& operator[](std::string_view name);
  const Param& operator[](std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  std::size_t count() const;
  void zero_grad();
  std::vector<double> flatten() const;
  /// FNV-1a over the raw bytes of every value, in registration order.
  std::uint64_t checksum() const;
  bool values_equal(const ParamSet& other) const;

 private:
  std::vector<Param> params_;
};

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace wdaseg
