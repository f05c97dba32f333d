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

// Multi-seed sweeps, record files and SVG figures.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wdaseg/trainer.hpp"

namespace wdaseg::experiment {

inline constexpr const char* kToolVersion = "0.1.0";

/// Median of a non-empty sample; the mean of the middle pair for even sizes.
double median(std::vector<double> xs);

enum class SweepParam { T, lambda_c, lambda_adv, points };

const char* sweep_param_name(SweepParam p);
SweepParam parse_sweep_param(const std::string& name);
/// Returns cfg with the swept field set to value. points must be a positive integer.
train::TrainConfig apply_sweep_value(train::TrainConfig cfg, SweepParam p, double value);

struct SweepCell {
  double value = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> miou;  // final mIoU per seed
  std::vector<std::optional<double>> miou_subset;
  std::vector<std::optional<double>> recall;  // final pseudo-label recall per seed
  double median_miou = 0.0;
  std::optional<double> median_miou_subset;
  std::optional<double> median_recall;
};

struct SweepTable {
  SweepParam param = SweepParam::T;
  std::vector<SweepCell> cells;
  /// Median recall never increases from one grid value to the next (grid in
  /// the given order); empty when some cell has no recall.
  std::optional<bool> recall_non_increasing;
};

/// Called after every finished run; may write artifacts.
using RunSink = std::function<void(double value, std::uint64_t seed, const train::RunResult&)>;

/// One full run per (value, seed), in grid-major order.
SweepTable run_sweep(const train::TrainConfig& base, SweepParam p, const std::vector<double>& grid,
                     const std::vector<std::uint64_t>& seeds, const synth::Dataset& ds,
                     const RunSink& sink = {});

std::string sweep_to_json(const SweepTable& t);
SweepTable sweep_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Record files: one JSON object per line.

void write_record(const std::filesystem::path& path, const train::RunRecord& rec);
/// Lines with "type" other than "eval" are skipped. A malformed line throws
/// with its line number.
train::RunRecord read_record(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Figures. Output is a pure function of the inputs.

struct Series {
  std::string label;
  std::vector<double> x, y;
};

/// Line chart; y values are mIoU fractions shown as percentages.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series);
/// One bar per class; undefined values are drawn as a marker-free gap.
std::string bar_chart_svg(const std::string& title, const std::vector<std::optional<double>>& values);

std::string training_curve_svg(const std::vector<std::pair<std::string, train::RunRecord>>& runs);
std::string per_class_svg(const train::EvalRow& row);
std::string sweep_svg(const SweepTable& t);

}  // namespace wdaseg::experiment
