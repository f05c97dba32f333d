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

#include <algorithm>

#include "doctest.h"

#include "wdaseg/losses.hpp"
#include "wdaseg/metrics.hpp"
#include "wdaseg/rng.hpp"

using namespace wdaseg;
using namespace wdaseg::metrics;
using doctest::Approx;

namespace {

LabelMap labels(int h, int w, std::vector<std::uint8_t> v) {
  LabelMap m(h, w);
  m.v = std::move(v);
  return m;
}

LabelMap random_labels(Rng& rng, int h, int w, int C) {
  LabelMap m(h, w);
  for (auto& v : m.v) v = static_cast<std::uint8_t>(rng.below(C));
  return m;
}

/// Confusion matrix with TP=6, FP=2, FN=4 for class 1.
ConfusionMatrix tp6_fp2_fn4() {
  ConfusionMatrix cm(2);
  std::vector<std::uint8_t> truth, pred;
  auto add = [&](int n, std::uint8_t t, std::uint8_t p) {
    for (int i = 0; i < n; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add(6, 1, 1);
  add(2, 0, 1);
  add(4, 1, 0);
  cm.accumulate(labels(1, 12, pred), labels(1, 12, truth));
  return cm;
}

}  // namespace

TEST_CASE("accumulate") {
  ConfusionMatrix cm(3);
  const auto gt = labels(2, 2, {0, 1, 2, 2});
  cm.accumulate(gt, gt);
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 3; ++p) CHECK(cm.at(t, p) == (t == p ? (t == 2 ? 2u : 1u) : 0u));

  // Hand-counted 2x2 case.
  ConfusionMatrix hand(3);
  hand.accumulate(labels(2, 2, {0, 2, 2, 1}), labels(2, 2, {0, 1, 2, 2}));
  CHECK(hand.at(0, 0) == 1);
  CHECK(hand.at(1, 2) == 1);
  CHECK(hand.at(2, 2) == 1);
  CHECK(hand.at(2, 1) == 1);
  CHECK(hand.total() == 4);

  const ConfusionMatrix before = hand;
  hand.accumulate(LabelMap(), LabelMap());
  CHECK(hand == before);

  CHECK_THROWS(hand.accumulate(LabelMap(2, 2), LabelMap(2, 3)));
  CHECK_THROWS(hand.accumulate(labels(1, 1, {3}), labels(1, 1, {0})));
  CHECK_THROWS(hand.accumulate(labels(1, 1, {0}), labels(1, 1, {7})));
}

TEST_CASE("argmax ties go to the lowest index") {
  Grid O(1, 3, 3);
  O.v = {0.2, 0.4, 0.4, 0.5, 0.5, 0.0, 0.1, 0.2, 0.7};
  CHECK(argmax_labels(O).v == std::vector<std::uint8_t>{1, 0, 2});
  Tensor T(2, 1, 3, 3);
  T.set_image(1, O);
  CHECK(argmax_labels(T, 1).v == std::vector<std::uint8_t>{1, 0, 2});
  CHECK(argmax_labels(T, 0).v == std::vector<std::uint8_t>{0, 0, 0});
}

TEST_CASE("per_class_iou") {
  ConfusionMatrix perfect(4);
  perfect.accumulate(labels(1, 3, {0, 1, 3}), labels(1, 3, {0, 1, 3}));
  const auto iou = per_class_iou(perfect);
  CHECK(*iou[0] == 1.0);
  CHECK(*iou[1] == 1.0);
  CHECK_FALSE(iou[2].has_value());
  CHECK(*iou[3] == 1.0);

  ConfusionMatrix disjoint(2);
  disjoint.accumulate(labels(1, 2, {1, 1}), labels(1, 2, {0, 0}));
  CHECK(*per_class_iou(disjoint)[1] == 0.0);
  CHECK(*per_class_iou(disjoint)[0] == 0.0);

  CHECK(*per_class_iou(tp6_fp2_fn4())[1] == 0.5);
}

TEST_CASE("mean_iou") {
  ConfusionMatrix perfect(3);
  perfect.accumulate(labels(1, 3, {0, 1, 2}), labels(1, 3, {0, 1, 2}));
  CHECK(mean_iou(perfect) == 1.0);

  // IoUs (1.0, 0.5, undefined, 0.0): class 3 absorbs the one error.
  ConfusionMatrix cm(4);
  cm.accumulate(labels(1, 4, {0, 0, 1, 3}), labels(1, 4, {0, 0, 1, 1}));
  const auto iou = per_class_iou(cm);
  CHECK(*iou[0] == 1.0);
  CHECK(*iou[1] == 0.5);
  CHECK_FALSE(iou[2].has_value());
  CHECK(*iou[3] == 0.0);
  CHECK(mean_iou(cm, {0, 1, 2}) == 0.75);
  CHECK(mean_iou(cm) == 0.5);
  for (int c : {0, 1, 3}) CHECK(mean_iou(cm, {c}) == *iou[c]);

  CHECK_THROWS(mean_iou(perfect, {5}));
  CHECK_THROWS(mean_iou(ConfusionMatrix(3)));
  CHECK_THROWS(mean_iou(cm, {2}));
}

TEST_CASE("metrics are invariant to image order and merge by addition") {
  Rng rng(1);
  std::vector<std::pair<LabelMap, LabelMap>> imgs;
  for (int i = 0; i < 20; ++i) imgs.push_back({random_labels(rng, 5, 6, 4), random_labels(rng, 5, 6, 4)});
  ConfusionMatrix a(4), b(4), s1(4), s2(4);
  for (const auto& [p, t] : imgs) a.accumulate(p, t);
  std::reverse(imgs.begin(), imgs.end());
  for (const auto& [p, t] : imgs) b.accumulate(p, t);
  for (std::size_t i = 0; i < imgs.size(); ++i) (i % 2 ? s1 : s2).accumulate(imgs[i].first, imgs[i].second);
  s1 += s2;
  CHECK(a == b);
  CHECK(a == s1);
  CHECK(a.total() == 20u * 30u);
  CHECK(mean_iou(a) == mean_iou(b));
  for (const auto& v : per_class_iou(a)) {
    CHECK(*v >= 0.0);
    CHECK(*v <= 1.0);
  }
  CHECK_THROWS(a += ConfusionMatrix(3));
}

TEST_CASE("weak_label_pr") {
  const std::vector<WeakLabel> truth = {{1, 1, 0}, {1, 0, 1}};
  const auto same = weak_label_pr(truth, truth);
  CHECK(*same.micro.precision == 1.0);
  CHECK(*same.micro.recall == 1.0);

  const auto none = weak_label_pr({{0, 0, 0}, {0, 0, 0}}, truth);
  CHECK(*none.micro.recall == 0.0);
  CHECK_FALSE(none.micro.precision.has_value());

  // TP 3, FP 1, FN 2.
  const auto hand = weak_label_pr({{1, 1, 1}, {1, 0, 0}, {0, 0, 0}}, {{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  CHECK(hand.micro.tp == 3);
  CHECK(hand.micro.fp == 1);
  CHECK(hand.micro.fn == 2);
  CHECK(*hand.micro.precision == 0.75);
  CHECK(*hand.micro.recall == 0.6);
  CHECK(*hand.per_class[0].recall == 1.0);
  CHECK(*hand.per_class[1].recall == 0.5);
  CHECK(*hand.per_class[2].precision == 0.0);
  CHECK(*hand.per_class[2].recall == 0.0);

  CHECK_THROWS(weak_label_pr({{1}}, {}));
  CHECK_THROWS(weak_label_pr({{1, 0}}, {{1}}));
}

TEST_CASE("pseudo-label recall never increases with the threshold") {
  Rng rng(2);
  std::vector<std::vector<double>> probs;
  std::vector<WeakLabel> truth;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> p(5);
    WeakLabel y(5);
    for (int c = 0; c < 5; ++c) {
      p[c] = rng.uniform();
      y[c] = rng.bernoulli(0.5);
    }
    probs.push_back(p);
    truth.push_back(y);
  }
  double prev = 2.0;
  for (double T = 0.0; T <= 1.0; T += 0.05) {
    std::vector<WeakLabel> pred;
    for (const auto& p : probs) pred.push_back(losses::pseudo_weak_labels(p, T));
    const double r = *weak_label_pr(pred, truth).micro.recall;
    CHECK(r <= prev);
    prev = r;
  }
}
