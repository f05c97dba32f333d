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

#include "wdaseg/metrics.hpp"

#include <numeric>
#include <stdexcept>

namespace wdaseg::metrics {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 0) throw std::invalid_argument("ConfusionMatrix: negative class count");
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& truth) {
  if (pred.h != truth.h || pred.w != truth.w || pred.v.size() != truth.v.size()) {
    throw std::invalid_argument("accumulate: shape mismatch");
  }
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const int t = truth.v[i], p = pred.v[i];
    if (t >= classes_ || p >= classes_) throw std::invalid_argument("accumulate: class index out of range");
    ++counts_[static_cast<std::size_t>(t) * classes_ + p];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("ConfusionMatrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

LabelMap argmax_labels(const Grid& O) {
  LabelMap out(O.h, O.w);
  for (std::size_t p = 0; p < O.pixels(); ++p) {
    const auto v = O.pixel(p);
    int best = 0;
    for (int k = 1; k < O.c; ++k) {
      if (v[k] > v[best]) best = k;
    }
    out.v[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelMap argmax_labels(const Tensor& O, int b) {
  LabelMap out(O.h, O.w);
  const auto img = O.image_span(b);
  for (std::size_t p = 0; p < out.v.size(); ++p) {
    const double* v = img.data() + p * O.c;
    int best = 0;
    for (int k = 1; k < O.c; ++k) {
      if (v[k] > v[best]) best = k;
    }
    out.v[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm) {
  const int C = cm.classes();
  std::vector<std::optional<double>> iou(C);
  for (int c = 0; c < C; ++c) {
    std::uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < C; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom > 0) iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return iou;
}

double mean_iou(const ConfusionMatrix& cm, const std::vector<int>& subset) {
  const auto iou = per_class_iou(cm);
  std::vector<int> classes = subset;
  if (classes.empty()) {
    classes.resize(iou.size());
    std::iota(classes.begin(), classes.end(), 0);
  }
  double sum = 0.0;
  int n = 0;
  for (int c : classes) {
    if (c < 0 || c >= static_cast<int>(iou.size())) throw std::invalid_argument("mean_iou: subset index out of range");
    if (iou[c]) {
      sum += *iou[c];
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("mean_iou: no defined IoU in the subset");
  return sum / n;
}

namespace {

PrecisionRecall finish(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  PrecisionRecall pr;
  pr.tp = tp;
  pr.fp = fp;
  pr.fn = fn;
  if (tp + fp > 0) pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return pr;
}

}  // namespace

WeakLabelPR weak_label_pr(const std::vector<WeakLabel>& pred, const std::vector<WeakLabel>& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("weak_label_pr: set size mismatch");
  WeakLabelPR out;
  if (pred.empty()) {
    out.micro = finish(0, 0, 0);
    return out;
  }
  const std::size_t C = truth[0].size();
  std::vector<std::uint64_t> tp(C, 0), fp(C, 0), fn(C, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != C || truth[i].size() != C) throw std::invalid_argument("weak_label_pr: length mismatch");
    for (std::size_t c = 0; c < C; ++c) {
      if (pred[i][c] && truth[i][c]) ++tp[c];
      if (pred[i][c] && !truth[i][c]) ++fp[c];
      if (!pred[i][c] && truth[i][c]) ++fn[c];
    }
  }
  std::uint64_t TP = 0, FP = 0, FN = 0;
  for (std::size_t c = 0; c < C; ++c) {
    out.per_class.push_back(finish(tp[c], fp[c], fn[c]));
    TP += tp[c];
    FP += fp[c];
    FN += fn[c];
  }
  out.micro = finish(TP, FP, FN);
  return out;
}

}  // namespace wdaseg::metrics
