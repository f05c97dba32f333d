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

#include "wdaseg/serialize.hpp"

#include <stdexcept>
#include <string>

namespace wdaseg::synth {

void to_json(nlohmann::json& j, const Rgb& c) { j = nlohmann::json::array({c.r, c.g, c.b}); }

void from_json(const nlohmann::json& j, Rgb& c) {
  c.r = j.at(0).get<double>();
  c.g = j.at(1).get<double>();
  c.b = j.at(2).get<double>();
}

void to_json(nlohmann::json& j, const DomainParams& dp) {
  j = {{"palette", dp.palette},
       {"hue_shift", dp.hue_shift},
       {"brightness", dp.brightness},
       {"noise_sigma", dp.noise_sigma},
       {"blur_radius", dp.blur_radius}};
}

void from_json(const nlohmann::json& j, DomainParams& dp) {
  dp.palette = j.at("palette").get<std::vector<Rgb>>();
  dp.hue_shift = j.at("hue_shift").get<double>();
  dp.brightness = j.at("brightness").get<double>();
  dp.noise_sigma = j.at("noise_sigma").get<double>();
  dp.blur_radius = j.at("blur_radius").get<int>();
}

void to_json(nlohmann::json& j, const BenchmarkSpec& s) {
  j = {{"H", s.H},
       {"W", s.W},
       {"C", s.C},
       {"class_rarity", s.class_rarity},
       {"n_source", s.n_source},
       {"n_target", s.n_target},
       {"n_val", s.n_val},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, BenchmarkSpec& s) {
  s.H = j.at("H").get<int>();
  s.W = j.at("W").get<int>();
  s.C = j.at("C").get<int>();
  s.class_rarity = j.at("class_rarity").get<std::vector<double>>();
  s.n_source = j.at("n_source").get<int>();
  s.n_target = j.at("n_target").get<int>();
  s.n_val = j.at("n_val").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace wdaseg::synth

namespace wdaseg::nets {

void to_json(nlohmann::json& j, const SegNetConfig& c) {
  j = {{"input_channels", c.input_channels}, {"base_width", c.base_width},
       {"downsample_factor", c.downsample_factor}, {"feature_dim", c.feature_dim},
       {"num_classes", c.num_classes}};
}

void from_json(const nlohmann::json& j, SegNetConfig& c) {
  c.input_channels = j.value("input_channels", c.input_channels);
  c.base_width = j.value("base_width", c.base_width);
  c.downsample_factor = j.value("downsample_factor", c.downsample_factor);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
}

}  // namespace wdaseg::nets

namespace wdaseg::losses {

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda_c", w.lambda_c}, {"lambda_adv", w.lambda_adv}, {"lambda_out", w.lambda_out},
       {"k", w.k}, {"T", w.T}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.lambda_c = j.value("lambda_c", w.lambda_c);
  w.lambda_adv = j.value("lambda_adv", w.lambda_adv);
  w.lambda_out = j.value("lambda_out", w.lambda_out);
  w.k = j.value("k", w.k);
  w.T = j.value("T", w.T);
}

}  // namespace wdaseg::losses

namespace wdaseg::train {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"mode", mode_name(c.mode)},
       {"weights", c.weights},
       {"lambda_point", c.lambda_point},
       {"points_per_class", c.points_per_class},
       {"dropout", c.dropout},
       {"lr_G", c.lr_G},
       {"lr_D", c.lr_D},
       {"poly_power", c.poly_power},
       {"grad_clip_G", c.grad_clip_G},
       {"warmup_iters", c.warmup_iters},
       {"total_iters", c.total_iters},
       {"batch_size", c.batch_size},
       {"eval_interval", c.eval_interval},
       {"seed", c.seed},
       {"net", c.net},
       {"subset", c.subset}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("weights")) {
    auto w = c.weights;
    from_json(j.at("weights"), w);
    c.weights = w;
  }
  if (j.contains("net")) {
    auto n = c.net;
    from_json(j.at("net"), n);
    c.net = n;
  }
  c.lambda_point = j.value("lambda_point", c.lambda_point);
  c.points_per_class = j.value("points_per_class", c.points_per_class);
  c.dropout = j.value("dropout", c.dropout);
  c.lr_G = j.value("lr_G", c.lr_G);
  c.lr_D = j.value("lr_D", c.lr_D);
  c.poly_power = j.value("poly_power", c.poly_power);
  c.grad_clip_G = j.value("grad_clip_G", c.grad_clip_G);
  c.warmup_iters = j.value("warmup_iters", c.warmup_iters);
  c.total_iters = j.value("total_iters", c.total_iters);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.seed = j.value("seed", c.seed);
  c.subset = j.value("subset", c.subset);
}

}  // namespace wdaseg::train
