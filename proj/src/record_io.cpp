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

// One JSON object per line. Doubles are written in shortest round-trip form,
// so parse(dump(row)) == row bit for bit. Undefined values are null.

#include <stdexcept>

#include "json.hpp"
#include "wdaseg/trainer.hpp"

namespace wdaseg::train {
namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string to_json_line(const EvalRow& row) {
  json iou = json::array();
  for (const auto& v : row.iou) iou.push_back(opt(v));
  const auto& l = row.loss;
  json j = {{"type", "eval"},
            {"iteration", row.iteration},
            {"lr_G", row.lr_G},
            {"lr_D", row.lr_D},
            {"iou", iou},
            {"miou", row.miou},
            {"miou_subset", opt(row.miou_subset)},
            {"pseudo_precision", opt(row.pseudo_precision)},
            {"pseudo_recall", opt(row.pseudo_recall)},
            {"loss",
             {{"seg", opt(l.seg)},
              {"cls", opt(l.cls)},
              {"adv", opt(l.adv)},
              {"out", opt(l.out)},
              {"point", opt(l.point)},
              {"disc", opt(l.disc)},
              {"out_disc", opt(l.out_disc)}}}};
  return j.dump();
}

EvalRow parse_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed record: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("type", "") != "eval") throw std::invalid_argument("not an eval record");
    EvalRow row;
    row.iteration = j.at("iteration").get<int>();
    row.lr_G = j.at("lr_G").get<double>();
    row.lr_D = j.at("lr_D").get<double>();
    for (const auto& v : j.at("iou")) row.iou.push_back(v.is_null() ? std::nullopt : std::optional(v.get<double>()));
    row.miou = j.at("miou").get<double>();
    row.miou_subset = opt_from(j, "miou_subset");
    row.pseudo_precision = opt_from(j, "pseudo_precision");
    row.pseudo_recall = opt_from(j, "pseudo_recall");
    const auto& l = j.at("loss");
    row.loss.seg = opt_from(l, "seg");
    row.loss.cls = opt_from(l, "cls");
    row.loss.adv = opt_from(l, "adv");
    row.loss.out = opt_from(l, "out");
    row.loss.point = opt_from(l, "point");
    row.loss.disc = opt_from(l, "disc");
    row.loss.out_disc = opt_from(l, "out_disc");
    return row;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed record: ") + e.what());
  }
}

}  // namespace wdaseg::train
