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
#include <optional>
#include <vector>

#include "wdaseg/tensor.hpp"

namespace wdaseg::metrics {

/// C x C pixel counts; rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0);

  int classes() const { return classes_; }
  std::uint64_t at(int truth, int pred) const { return counts_[static_cast<std::size_t>(truth) * classes_ + pred]; }
  std::uint64_t total() const;

  /// Adds one image. pred and truth must have the same shape.
  void accumulate(const LabelMap& pred, const LabelMap& truth);
  /// Per-shard matrices merge by addition.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

/// Per-pixel argmax over channels of one image; ties go to the lowest index.
LabelMap argmax_labels(const Grid& O);
LabelMap argmax_labels(const Tensor& O, int b);

/// IoU_c = TP / (TP + FP + FN); empty when TP + FP + FN = 0.
std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm);

/// Mean of the defined IoUs over `subset` (all classes when empty).
/// Throws if no class in the subset is defined.
double mean_iou(const ConfusionMatrix& cm, const std::vector<int>& subset = {});

struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
  std::uint64_t tp = 0, fp = 0, fn = 0;
};

struct WeakLabelPR {
  std::vector<PrecisionRecall> per_class;
  PrecisionRecall micro;
};

/// Precision/recall of predicted presence decisions against true ones.
WeakLabelPR weak_label_pr(const std::vector<WeakLabel>& pred, const std::vector<WeakLabel>& truth);

}  // namespace wdaseg::metrics
