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

// Per-image loss and pooling kernels for weak-label domain adaptation.
//
// Every differentiable kernel comes as a forward function plus an explicit
// backward (or a gradient returned alongside the value). All functions are
// pure; batch averaging is the caller's job.

#include <span>
#include <vector>

#include "wdaseg/tensor.hpp"

namespace wdaseg::losses {

/// Every probability entering a log is clamped to [kProbEps, 1 - kProbEps].
inline constexpr double kProbEps = 1e-7;

double clamp_prob(double p);

struct LossWeights {
  double lambda_c = 0.01;     // weak-label classification
  double lambda_adv = 0.001;  // category-wise adversarial term
  double lambda_out = 0.001;  // output-space adversarial term (baseline)
  double k = 1.0;             // smooth-max sharpness
  double T = 0.2;             // pseudo-label threshold

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// ---------------------------------------------------------------------------
// Smooth-max (log-mean-exp) pooling followed by a sigmoid.

struct SmoothMax {
  std::vector<double> inner;  // (1/k) log mean exp(k A), one per category
  CategoryProb prob;          // sigmoid(inner)
};

SmoothMax smooth_max_pool(const PredictionMap& A, double k);

/// Gradient of sum_c dprob[c] * prob[c] with respect to A.
PredictionMap smooth_max_pool_backward(const PredictionMap& A, double k, const SmoothMax& fwd,
                                       std::span<const double> dprob);

// ---------------------------------------------------------------------------

struct VecLoss {
  double value = 0.0;
  std::vector<double> grad;
};

/// Category-wise binary cross-entropy between pooled probabilities and a weak label.
VecLoss weak_label_bce(std::span<const double> p, const WeakLabel& y);

/// Softmax over the spatial dimensions, independently for each channel.
Grid spatial_softmax(const PredictionMap& A);

/// Attention pooling: F^c = sum_{h,w} softmax_hw(A)[h,w,c] * F[h,w,:].
CategoryFeatures category_pool(const FeatureGrid& F, const PredictionMap& A);

struct PoolGrad {
  FeatureGrid dF;
  PredictionMap dA;
};

PoolGrad category_pool_backward(const FeatureGrid& F, const PredictionMap& A,
                                const CategoryFeatures& dpooled);

struct DomainLoss {
  double value = 0.0;
  std::vector<double> d_source;  // dL/d ds
  std::vector<double> d_target;  // dL/d dt
};

/// Category discriminator loss. Source features are labelled 1, target 0;
/// categories absent from an image contribute nothing.
DomainLoss discriminator_domain_loss(std::span<const double> ds, std::span<const double> dt,
                                     const WeakLabel& ys, const WeakLabel& yt);

/// Target-side adversarial loss: -sum_c yt[c] log dt[c].
VecLoss adversarial_loss(std::span<const double> dt, const WeakLabel& yt);

struct MapLoss {
  double value = 0.0;
  Grid grad;  // same shape as the probability map
};

/// Mean over pixels of -log O at the ground-truth class.
MapLoss segmentation_ce(const OutputMap& O, const LabelMap& Y);

/// Sum over labelled points of -log O at the point's category.
MapLoss point_loss(const OutputMap& O, const PointLabelSet& points);

/// y[c] = 1 iff p[c] > T (strict).
WeakLabel pseudo_weak_labels(std::span<const double> p, double T);

double joint_g_loss(double Ls, double Lc, double Ladv, double Lout, const LossWeights& w);

}  // namespace wdaseg::losses
