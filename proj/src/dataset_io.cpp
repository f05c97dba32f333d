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

// On-disk dataset layout:
//   <dir>/manifest.json
//   <dir>/<split>/NNNNN.ppm        binary PPM (P6), 8-bit RGB
//   <dir>/<split>/NNNNN_mask.pgm   binary PGM (P5), one class index per pixel

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wdaseg/serialize.hpp"
#include "wdaseg/synthdata.hpp"

namespace wdaseg::synth {
namespace {

namespace fs = std::filesystem;

constexpr Split kSplits[] = {Split::source, Split::target, Split::source_val, Split::target_val};

std::string stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu", i);
  return buf;
}

void write_pnm(const fs::path& path, const char* magic, int w, int h, const std::vector<std::uint8_t>& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << magic << "\n" << w << " " << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::uint8_t> read_pnm(const fs::path& path, const char* magic, int channels, int& w, int& h) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string m;
  int maxval = 0;
  is >> m >> w >> h >> maxval;
  if (m != magic || w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("bad image header: " + path.string());
  is.get();  // single whitespace after the header
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * channels);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!is) throw std::runtime_error("truncated image: " + path.string());
  return data;
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& ds, const std::string& tool_version) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json splits = nlohmann::json::object();
  for (Split s : kSplits) {
    const auto& scenes = ds.split(s);
    const fs::path sub = dir / split_name(s);
    fs::create_directories(sub, ec);
    if (ec) throw std::runtime_error("cannot create " + sub.string() + ": " + ec.message());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      write_pnm(sub / (stem(i) + ".ppm"), "P6", scenes[i].w, scenes[i].h, scenes[i].rgb);
      write_pnm(sub / (stem(i) + "_mask.pgm"), "P5", scenes[i].w, scenes[i].h, scenes[i].mask.v);
    }
    splits[split_name(s)] = scenes.size();
  }
  nlohmann::json manifest = {{"format", "wdaseg-dataset"},
                             {"version", 1},
                             {"tool_version", tool_version},
                             {"spec", ds.spec},
                             {"source_domain", ds.source_dp},
                             {"target_domain", ds.target_dp},
                             {"splits", splits}};
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("no manifest.json in " + dir.string());
  nlohmann::json m;
  try {
    is >> m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed manifest.json: " + std::string(e.what()));
  }
  if (m.value("format", "") != "wdaseg-dataset") throw std::runtime_error("not a wdaseg dataset: " + dir.string());
  Dataset ds;
  ds.spec = m.at("spec").get<BenchmarkSpec>();
  ds.source_dp = m.at("source_domain").get<DomainParams>();
  ds.target_dp = m.at("target_domain").get<DomainParams>();
  ds.spec.validate();
  for (Split s : kSplits) {
    const std::size_t n = m.at("splits").at(split_name(s)).get<std::size_t>();
    auto& out = ds.split(s);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const fs::path sub = dir / split_name(s);
      auto& sc = out[i];
      int w = 0, h = 0, mw = 0, mh = 0;
      sc.rgb = read_pnm(sub / (stem(i) + ".ppm"), "P6", 3, w, h);
      auto mask = read_pnm(sub / (stem(i) + "_mask.pgm"), "P5", 1, mw, mh);
      if (w != mw || h != mh) throw std::runtime_error("image/mask size mismatch in " + sub.string());
      sc.h = h;
      sc.w = w;
      sc.mask = LabelMap(h, w);
      sc.mask.v = std::move(mask);
      for (auto v : sc.mask.v) {
        if (v >= ds.spec.C) throw std::runtime_error("mask class index out of range in " + sub.string());
      }
    }
  }
  return ds;
}

}  // namespace wdaseg::synth
