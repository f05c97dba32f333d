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

#include "wdaseg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace wdaseg::experiment {

double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

const char* sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::T: return "T";
    case SweepParam::lambda_c: return "lambda_c";
    case SweepParam::lambda_adv: return "lambda_adv";
    case SweepParam::points: return "points";
  }
  return "?";
}

SweepParam parse_sweep_param(const std::string& name) {
  for (auto p : {SweepParam::T, SweepParam::lambda_c, SweepParam::lambda_adv, SweepParam::points}) {
    if (name == sweep_param_name(p)) return p;
  }
  throw std::invalid_argument("unknown sweep parameter: " + name + " (expected T, lambda_c, lambda_adv or points)");
}

train::TrainConfig apply_sweep_value(train::TrainConfig cfg, SweepParam p, double value) {
  switch (p) {
    case SweepParam::T: cfg.weights.T = value; break;
    case SweepParam::lambda_c: cfg.weights.lambda_c = value; break;
    case SweepParam::lambda_adv: cfg.weights.lambda_adv = value; break;
    case SweepParam::points:
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw std::invalid_argument("points grid values must be positive integers");
      }
      cfg.points_per_class = static_cast<int>(value);
      break;
  }
  cfg.weights.validate();
  return cfg;
}

namespace {

std::optional<double> median_opt(const std::vector<std::optional<double>>& xs) {
  std::vector<double> v;
  for (const auto& x : xs) {
    if (!x) return std::nullopt;
    v.push_back(*x);
  }
  if (v.empty()) return std::nullopt;
  return median(v);
}

}  // namespace

SweepTable run_sweep(const train::TrainConfig& base, SweepParam p, const std::vector<double>& grid,
                     const std::vector<std::uint64_t>& seeds, const synth::Dataset& ds, const RunSink& sink) {
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  SweepTable t;
  t.param = p;
  for (double v : grid) {
    SweepCell cell;
    cell.value = v;
    cell.seeds = seeds;
    const auto cfg_v = apply_sweep_value(base, p, v);
    for (auto s : seeds) {
      auto cfg = cfg_v;
      cfg.seed = s;
      const auto res = train::run_experiment(cfg, ds);
      const auto& last = res.record.rows.back();
      cell.miou.push_back(last.miou);
      cell.miou_subset.push_back(last.miou_subset);
      cell.recall.push_back(last.pseudo_recall);
      if (sink) sink(v, s, res);
    }
    cell.median_miou = median(cell.miou);
    cell.median_miou_subset = median_opt(cell.miou_subset);
    cell.median_recall = median_opt(cell.recall);
    t.cells.push_back(std::move(cell));
  }
  bool monotone = true;
  for (std::size_t i = 0; i < t.cells.size(); ++i) {
    if (!t.cells[i].median_recall) return t;
    if (i > 0 && *t.cells[i].median_recall > *t.cells[i - 1].median_recall) monotone = false;
  }
  t.recall_non_increasing = monotone;
  return t;
}

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_get(const json& j) { return j.is_null() ? std::nullopt : std::optional(j.get<double>()); }

}  // namespace

std::string sweep_to_json(const SweepTable& t) {
  json cells = json::array();
  for (const auto& c : t.cells) {
    json ms = json::array(), rs = json::array();
    for (const auto& x : c.miou_subset) ms.push_back(opt(x));
    for (const auto& x : c.recall) rs.push_back(opt(x));
    cells.push_back({{"value", c.value},
                     {"seeds", c.seeds},
                     {"miou", c.miou},
                     {"miou_subset", ms},
                     {"pseudo_recall", rs},
                     {"median_miou", c.median_miou},
                     {"median_miou_subset", opt(c.median_miou_subset)},
                     {"median_pseudo_recall", opt(c.median_recall)}});
  }
  json j = {{"param", sweep_param_name(t.param)},
            {"cells", cells},
            {"recall_non_increasing",
             t.recall_non_increasing ? json(*t.recall_non_increasing) : json(nullptr)}};
  return j.dump(2);
}

SweepTable sweep_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SweepTable t;
    t.param = parse_sweep_param(j.at("param").get<std::string>());
    for (const auto& c : j.at("cells")) {
      SweepCell cell;
      cell.value = c.at("value").get<double>();
      cell.seeds = c.at("seeds").get<std::vector<std::uint64_t>>();
      cell.miou = c.at("miou").get<std::vector<double>>();
      for (const auto& x : c.at("miou_subset")) cell.miou_subset.push_back(opt_get(x));
      for (const auto& x : c.at("pseudo_recall")) cell.recall.push_back(opt_get(x));
      cell.median_miou = c.at("median_miou").get<double>();
      cell.median_miou_subset = opt_get(c.at("median_miou_subset"));
      cell.median_recall = opt_get(c.at("median_pseudo_recall"));
      t.cells.push_back(std::move(cell));
    }
    const auto& m = j.at("recall_non_increasing");
    if (!m.is_null()) t.recall_non_increasing = m.get<bool>();
    return t;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed sweep table: ") + e.what());
  }
}

void write_record(const std::filesystem::path& path, const train::RunRecord& rec) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& row : rec.rows) os << train::to_json_line(row) << "\n";
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

train::RunRecord read_record(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  train::RunRecord rec;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("not a JSON object");
      if (j.value("type", "") != "eval") continue;
      auto row = train::parse_json_line(line);
      if (!rec.rows.empty() && row.iteration <= rec.rows.back().iteration) {
        throw std::invalid_argument("iterations must be strictly increasing");
      }
      rec.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (rec.rows.empty()) throw std::invalid_argument(path.string() + ": no eval records");
  return rec;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 64, kRight = 24, kTop = 40, kBottom = 56;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string o;
  for (char ch : s) {
    switch (ch) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += ch;
    }
  }
  return o;
}

// Short tick label: up to 4 significant digits, no trailing zeros.
std::string tick(double v) { return fmt("%.4g", v); }

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (kHeight - kTop - kBottom); }
};

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title)
     << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& x_label, const std::string& y_label,
          const std::vector<double>& xticks) {
  const double bx = kLeft, by = kHeight - kBottom, tx = kWidth - kRight, ty = kTop;
  os << "<path d=\"M" << bx << " " << ty << " V" << by << " H" << tx << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 5.0;
    const std::string y = fmt("%.2f", f.py(v));
    os << "<line x1=\"" << bx - 4 << "\" y1=\"" << y << "\" x2=\"" << tx << "\" y2=\"" << y
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << bx - 8 << "\" y=\"" << y << "\" text-anchor=\"end\" dominant-baseline=\"middle\">"
       << tick(100.0 * v) << "</text>\n";
  }
  for (double v : xticks) {
    const std::string x = fmt("%.2f", f.px(v));
    os << "<line x1=\"" << x << "\" y1=\"" << by << "\" x2=\"" << x << "\" y2=\"" << by + 4
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << by + 18 << "\" text-anchor=\"middle\">" << tick(v) << "</text>\n";
  }
  os << "<text x=\"" << (bx + tx) / 2 << "\" y=\"" << kHeight - 14 << "\" text-anchor=\"middle\">" << esc(x_label)
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << (by + ty) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (by + ty) / 2 << ")\">" << esc(y_label) << "</text>\n";
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
  if (series.empty()) throw std::invalid_argument("line chart needs at least one series");
  Frame f{0, 0, 0, 0};
  bool first = true;
  std::vector<double> xs;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty()) throw std::invalid_argument("series '" + s.label + "' is empty or ragged");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        f = {s.x[i], s.x[i], s.y[i], s.y[i]};
        first = false;
      }
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
      xs.push_back(s.x[i]);
    }
  }
  // Pad the value range to whole percentage points.
  f.y0 = std::floor(f.y0 * 100.0 - 1.0) / 100.0;
  f.y1 = std::ceil(f.y1 * 100.0 + 1.0) / 100.0;
  f.y0 = std::max(0.0, f.y0);
  f.y1 = std::min(1.0, f.y1);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<double> xticks;
  if (xs.size() <= 8) {
    xticks = xs;
  } else {
    for (int i = 0; i <= 4; ++i) xticks.push_back(f.x0 + (f.x1 - f.x0) * i / 4.0);
  }

  std::ostringstream os;
  header(os, title);
  axes(os, f, x_label, "mIoU (%)", xticks);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      os << (i ? " " : "") << fmt("%.2f", f.px(s.x[i])) << "," << fmt("%.2f", f.py(s.y[i]));
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      os << "<circle cx=\"" << fmt("%.2f", f.px(s.x[i])) << "\" cy=\"" << fmt("%.2f", f.py(s.y[i]))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 8 + 16 * static_cast<double>(k);
    os << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << ly - 5 << "\" width=\"10\" height=\"10\" fill=\""
       << color << "\"/>\n";
    os << "<text x=\"" << kWidth - kRight - 134 << "\" y=\"" << ly << "\" dominant-baseline=\"middle\">"
       << esc(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::optional<double>>& values) {
  if (values.empty()) throw std::invalid_argument("bar chart needs at least one value");
  const Frame f{-0.5, static_cast<double>(values.size()) - 0.5, 0.0, 1.0};
  std::vector<double> xticks;
  for (std::size_t c = 0; c < values.size(); ++c) xticks.push_back(static_cast<double>(c));
  std::ostringstream os;
  header(os, title);
  axes(os, f, "class", "IoU (%)", xticks);
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(values.size());
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (!values[c]) continue;
    const double x = f.px(static_cast<double>(c)) - 0.35 * slot;
    const double top = f.py(*values[c]);
    os << "<rect x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", top) << "\" width=\"" << fmt("%.2f", 0.7 * slot)
       << "\" height=\"" << fmt("%.2f", f.py(0.0) - top) << "\" fill=\"" << kColors[0] << "\"/>\n";
    os << "<text x=\"" << fmt("%.2f", f.px(static_cast<double>(c))) << "\" y=\"" << fmt("%.2f", top - 4)
       << "\" text-anchor=\"middle\">" << fmt("%.1f", 100.0 * *values[c]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string training_curve_svg(const std::vector<std::pair<std::string, train::RunRecord>>& runs) {
  std::vector<Series> series;
  for (const auto& [label, rec] : runs) {
    Series s{label, {}, {}};
    for (const auto& row : rec.rows) {
      s.x.push_back(row.iteration);
      s.y.push_back(row.miou);
    }
    series.push_back(std::move(s));
  }
  return line_chart_svg("target mIoU during training", "iteration", series);
}

std::string per_class_svg(const train::EvalRow& row) {
  return bar_chart_svg("per-class IoU at iteration " + std::to_string(row.iteration), row.iou);
}

std::string sweep_svg(const SweepTable& t) {
  Series s{std::string("median mIoU over seeds"), {}, {}};
  for (const auto& c : t.cells) {
    s.x.push_back(c.value);
    s.y.push_back(c.median_miou);
  }
  const std::string name = sweep_param_name(t.param);
  return line_chart_svg("target mIoU vs " + name, name, {s});
}

}  // namespace wdaseg::experiment
