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

// Alternating generator/discriminator training.
//
// Every iteration runs one forward pass over a source and a target batch,
// derives the target weak labels from it, then takes one discriminator step
// followed by one segmentation step. All randomness (batch indices, dropout
// masks, point annotations) comes from stateless streams keyed by
// (seed, iteration, image), so skipping a term never shifts another draw.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wdaseg/losses.hpp"
#include "wdaseg/metrics.hpp"
#include "wdaseg/nets.hpp"
#include "wdaseg/optim.hpp"
#include "wdaseg/synthdata.hpp"

namespace wdaseg::train {

enum class Mode { source_only, baseline, uda_weak, wda_image, wda_point };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& name);

/// True for the modes that use weak labels after warm-up.
bool uses_weak_labels(Mode m);

struct TrainConfig {
  Mode mode = Mode::baseline;
  losses::LossWeights weights;
  double lambda_point = 1.0;
  int points_per_class = 1;
  double dropout = 0.0;  // on the logits feeding the classification term
  double lr_G = 2.5e-4;
  double lr_D = 1e-4;
  double poly_power = 0.9;
  double grad_clip_G = 0.0;  // max L2 norm of the segmentation gradient; 0 disables
  int warmup_iters = 1000;
  int total_iters = 4000;
  int batch_size = 4;
  int eval_interval = 500;
  std::uint64_t seed = 0;
  nets::SegNetConfig net;
  std::vector<int> subset;  // classes of the reduced mean; empty = 1..C-1

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Mode-specific defaults: classification weight 0.01 and dropout 0.3 for
/// uda_weak, 0.2 and 0.1 for the weakly supervised modes.
TrainConfig default_config(Mode m);

/// base_lr * (1 - iter / total_iters)^power.
double poly_lr(int iter, double base_lr, int total_iters, double power);

struct TrainState {
  nets::Networks nets;
  SgdMomentum opt_G;
  Adam opt_bank;
  Adam opt_out;
};

TrainState init_state(const TrainConfig& cfg);

/// Target weak labels of one iteration.
struct WeakSupervision {
  std::vector<WeakLabel> labels;       // per image
  std::vector<PointLabelSet> points;   // per image; wda_point only
};

/// uda_weak thresholds the smooth-max pooled logits of the given forward pass;
/// the wda modes read the masks. Points are keyed by the scene index, so an
/// image keeps the same annotation across iterations.
WeakSupervision acquire_weak_labels(const TrainConfig& cfg, const Tensor& A_target,
                                    const std::vector<LabelMap>& masks,
                                    const std::vector<std::size_t>& scene_indices);

/// Point term of one image. Each category's points are averaged, so the scale
/// does not grow with points_per_class; with one point per category this is
/// losses::point_loss.
losses::MapLoss point_term(const OutputMap& O, const PointLabelSet& points);

/// One iteration's inputs and forward activations.
struct StepInputs {
  int iteration = 0;
  synth::BatchView source;
  synth::BatchView target;
  nets::SegCache fwd_source;
  std::optional<nets::SegCache> fwd_target;
  std::vector<WeakLabel> source_labels;
  std::optional<WeakSupervision> target_weak;  // set after warm-up in weak-label modes
};

/// Loss values of one iteration; unset means the term was not computed.
struct LossComponents {
  std::optional<double> seg, cls, adv, out, point;  // segmentation step
  std::optional<double> disc, out_disc;             // discriminator step

  bool operator==(const LossComponents&) const = default;
};

StepInputs prepare_step(const TrainConfig& cfg, const TrainState& st, const synth::Dataset& ds, int iteration);

/// Adam step on the category discriminators and the output-space
/// discriminator using detached activations. Discriminators with no present
/// category in the batch are skipped entirely.
void train_step_D(const TrainConfig& cfg, TrainState& st, const StepInputs& in, LossComponents& out);

/// Momentum SGD step on the segmentation network with the discriminators fixed.
void train_step_G(const TrainConfig& cfg, TrainState& st, const StepInputs& in, LossComponents& out);

struct EvalResult {
  metrics::ConfusionMatrix cm;
  std::vector<std::optional<double>> iou;
  double miou = 0.0;
  std::optional<double> miou_subset;
  metrics::WeakLabelPR pseudo;  // thresholded smooth-max vs mask-derived labels
};

/// Evaluates a network on a set of scenes. `subset` empty means 1..C-1.
EvalResult evaluate(const nets::SegNet& net, const std::vector<synth::Scene>& scenes,
                    const std::vector<int>& subset, double k, double T, int batch_size = 10);

struct EvalRow {
  int iteration = 0;
  double lr_G = 0.0;
  double lr_D = 0.0;
  std::vector<std::optional<double>> iou;
  double miou = 0.0;
  std::optional<double> miou_subset;
  std::optional<double> pseudo_precision, pseudo_recall;
  LossComponents loss;  // means over the iterations since the previous row

  bool operator==(const EvalRow&) const = default;
};

struct RunRecord {
  std::vector<EvalRow> rows;
  bool operator==(const RunRecord&) const = default;
};

std::string to_json_line(const EvalRow& row);
EvalRow parse_json_line(const std::string& line);

enum class StepEvent { before_D, after_D, before_G, after_G };

/// Observer called around every step; used to check the alternation contract.
using StepObserver = std::function<void(int iteration, StepEvent, const nets::Networks&)>;

struct RunResult {
  RunRecord record;
  nets::Networks nets;
};

/// Runs warm-up and adaptation phases with periodic evaluation on target_val.
/// Throws NumericalError on a non-finite loss.
RunResult run_experiment(const TrainConfig& cfg, const synth::Dataset& ds, const StepObserver& observer = {});

/// Convenience overload: generates the source / large-gap target benchmark.
RunResult run_experiment(const TrainConfig& cfg, const synth::BenchmarkSpec& spec);

}  // namespace wdaseg::train
