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

// Command-line front end: generate, train, sweep, eval, plot.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wdaseg/experiment.hpp"
#include "wdaseg/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wdaseg;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

json read_json_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::invalid_argument("cannot read " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed JSON in " + p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *v);
  return buf;
}

// ---------------------------------------------------------------------------
// Benchmark source: an on-disk dataset or a generated one.

struct DataOptions {
  std::string dataset;
  std::uint64_t data_seed = 0;
};

struct LoadedData {
  synth::Dataset ds;
  json provenance;  // goes into the manifest
};

LoadedData load_data(const DataOptions& o, const json& cfg_file) {
  LoadedData out;
  std::string dir = o.dataset;
  if (cfg_file.contains("dataset")) dir = cfg_file.at("dataset").get<std::string>();
  if (!dir.empty()) {
    out.ds = synth::read_dataset(dir);
    out.provenance = {{"dataset", fs::absolute(dir).string()}};
    return out;
  }
  synth::BenchmarkSpec spec;
  spec.seed = o.data_seed;
  auto src = synth::source_domain(spec.C);
  auto tgt = synth::large_gap_domain(spec.C);
  if (cfg_file.contains("benchmark")) {
    const auto& b = cfg_file.at("benchmark");
    spec = b.at("spec").get<synth::BenchmarkSpec>();
    src = b.at("source_domain").get<synth::DomainParams>();
    tgt = b.at("target_domain").get<synth::DomainParams>();
  }
  out.ds = synth::make_dataset(spec, src, tgt);
  out.provenance = {{"benchmark", {{"spec", spec}, {"source_domain", src}, {"target_domain", tgt}}}};
  return out;
}

// ---------------------------------------------------------------------------
// Training flags shared by train and sweep.

struct TrainFlags {
  std::string mode = "baseline";
  std::optional<double> T, lambda_c, lambda_adv, lambda_out, lambda_point, k, dropout, lr_G, lr_D, clip_G;
  std::optional<int> points, iters, warmup, batch, eval_interval, base_width, feature_dim;
  std::vector<int> subset;
  std::string config;
  std::string out_dir;
  DataOptions data;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--mode", f.mode, "source_only | baseline | uda_weak | wda_image | wda_point")
      ->check(CLI::IsMember({"source_only", "baseline", "uda_weak", "wda_image", "wda_point"}));
  app->add_option("--T", f.T, "pseudo-label threshold in [0, 1]");
  app->add_option("--lambda-c", f.lambda_c, "weak-label classification weight");
  app->add_option("--lambda-adv", f.lambda_adv, "category-wise adversarial weight");
  app->add_option("--lambda-out", f.lambda_out, "output-space adversarial weight");
  app->add_option("--lambda-point", f.lambda_point, "point-supervision weight");
  app->add_option("--k", f.k, "smooth-max sharpness (> 0)");
  app->add_option("--points", f.points, "annotated points per present class (wda_point)");
  app->add_option("--dropout", f.dropout, "dropout on the classification branch");
  app->add_option("--iters", f.iters, "total iterations");
  app->add_option("--warmup", f.warmup, "warm-up iterations");
  app->add_option("--batch", f.batch, "images per domain per iteration");
  app->add_option("--eval-interval", f.eval_interval, "iterations between evaluations");
  app->add_option("--lr-g", f.lr_G, "segmentation learning rate");
  app->add_option("--lr-d", f.lr_D, "discriminator learning rate");
  app->add_option("--clip-g", f.clip_G, "max norm of the segmentation gradient (0 disables)");
  app->add_option("--base-width", f.base_width, "conv block width");
  app->add_option("--feature-dim", f.feature_dim, "feature dimension");
  app->add_option("--subset", f.subset, "classes of the reduced mean (default 1..C-1)");
  app->add_option("--config", f.config, "JSON config or manifest; its values override flags");
  app->add_option("--out-dir", f.out_dir, "output directory")->required();
  app->add_option("--dataset", f.data.dataset, "dataset directory written by 'generate' (default: generate)");
  app->add_option("--data-seed", f.data.data_seed, "benchmark seed when generating");
}

// Mode defaults, then flags, then the config file.
train::TrainConfig build_config(const TrainFlags& f, const json& file) {
  const json cfg_json = file.contains("config") ? file.at("config") : file;
  std::string mode = f.mode;
  if (cfg_json.is_object() && cfg_json.contains("mode")) mode = cfg_json.at("mode").get<std::string>();
  auto cfg = train::default_config(train::parse_mode(mode));
  if (f.T) cfg.weights.T = *f.T;
  if (f.lambda_c) cfg.weights.lambda_c = *f.lambda_c;
  if (f.lambda_adv) cfg.weights.lambda_adv = *f.lambda_adv;
  if (f.lambda_out) cfg.weights.lambda_out = *f.lambda_out;
  if (f.lambda_point) cfg.lambda_point = *f.lambda_point;
  if (f.k) cfg.weights.k = *f.k;
  if (f.dropout) cfg.dropout = *f.dropout;
  if (f.points) cfg.points_per_class = *f.points;
  if (f.iters) cfg.total_iters = *f.iters;
  if (f.warmup) cfg.warmup_iters = *f.warmup;
  if (f.batch) cfg.batch_size = *f.batch;
  if (f.eval_interval) cfg.eval_interval = *f.eval_interval;
  if (f.lr_G) cfg.lr_G = *f.lr_G;
  if (f.lr_D) cfg.lr_D = *f.lr_D;
  if (f.clip_G) cfg.grad_clip_G = *f.clip_G;
  if (f.base_width) cfg.net.base_width = *f.base_width;
  if (f.feature_dim) cfg.net.feature_dim = *f.feature_dim;
  if (!f.subset.empty()) cfg.subset = f.subset;
  if (cfg_json.is_object() && !cfg_json.empty()) {
    try {
      train::from_json(cfg_json, cfg);
    } catch (const json::exception& e) {
      throw std::invalid_argument(std::string("bad config: ") + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  auto j = read_json_file(path);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object: " + path);
  return j;
}

json manifest_base(const std::string& command, const train::TrainConfig& cfg, const json& provenance) {
  json m = {{"tool_version", experiment::kToolVersion}, {"command", command}, {"config", cfg}};
  for (const auto& [k, v] : provenance.items()) m[k] = v;
  return m;
}

// ---------------------------------------------------------------------------

int cmd_generate(const fs::path& out_dir, synth::BenchmarkSpec spec, const std::vector<double>& rarity,
                 const std::string& preset, const std::string& config) {
  if (!rarity.empty()) spec.class_rarity = rarity;
  const json file = load_config_file(config);
  auto src = synth::source_domain(spec.C);
  auto tgt = preset == "none" ? synth::source_domain(spec.C) : synth::large_gap_domain(spec.C);
  if (file.contains("spec")) spec = file.at("spec").get<synth::BenchmarkSpec>();
  if (file.contains("benchmark")) {
    const auto& b = file.at("benchmark");
    spec = b.at("spec").get<synth::BenchmarkSpec>();
    src = b.at("source_domain").get<synth::DomainParams>();
    tgt = b.at("target_domain").get<synth::DomainParams>();
  }
  if (file.contains("source_domain")) src = file.at("source_domain").get<synth::DomainParams>();
  if (file.contains("target_domain")) tgt = file.at("target_domain").get<synth::DomainParams>();
  spec.validate();
  const auto ds = synth::make_dataset(spec, src, tgt);
  synth::write_dataset(out_dir, ds, experiment::kToolVersion);
  std::cout << "wrote " << ds.source.size() << " source, " << ds.target.size() << " target, "
            << ds.source_val.size() << "+" << ds.target_val.size() << " validation scenes to " << out_dir.string()
            << "\n";
  return 0;
}

int cmd_train(const TrainFlags& f, std::optional<std::uint64_t> seed) {
  const json file = load_config_file(f.config);
  auto cfg = build_config(f, file);
  if (seed && !(file.contains("config") ? file.at("config") : file).contains("seed")) cfg.seed = *seed;
  const auto data = load_data(f.data, file);
  const fs::path out(f.out_dir);
  ensure_dir(out);
  const auto res = train::run_experiment(cfg, data.ds);
  experiment::write_record(out / "record.jsonl", res.record);
  nets::save_checkpoint(out / "checkpoint.bin", res.nets);
  json m = manifest_base("train", cfg, data.provenance);
  m["seeds"] = {cfg.seed};
  m["artifacts"] = {{"record", "record.jsonl"}, {"checkpoint", "checkpoint.bin"}};
  write_text(out / "manifest.json", m.dump(2) + "\n");
  const auto& last = res.record.rows.back();
  std::cout << "mode " << train::mode_name(cfg.mode) << " iteration " << last.iteration << ": mIoU " << pct(last.miou)
            << " mIoU* " << pct(last.miou_subset) << "\n";
  return 0;
}

int cmd_sweep(const TrainFlags& f, std::string param, std::vector<double> grid, std::vector<std::uint64_t> seeds) {
  const json file = load_config_file(f.config);
  auto cfg = build_config(f, file);
  if (file.contains("param")) param = file.at("param").get<std::string>();
  if (file.contains("grid")) grid = file.at("grid").get<std::vector<double>>();
  if (file.contains("seeds")) seeds = file.at("seeds").get<std::vector<std::uint64_t>>();
  const auto p = experiment::parse_sweep_param(param);
  if (grid.empty()) throw std::invalid_argument("--grid must not be empty");
  if (seeds.empty()) throw std::invalid_argument("--seeds must not be empty");
  for (double v : grid) experiment::apply_sweep_value(cfg, p, v).validate();
  const auto data = load_data(f.data, file);
  const fs::path out(f.out_dir);
  ensure_dir(out);
  json runs = json::array();
  const auto table = experiment::run_sweep(cfg, p, grid, seeds, data.ds,
                                           [&](double v, std::uint64_t s, const train::RunResult& r) {
                                             char name[96];
                                             std::snprintf(name, sizeof(name), "%s=%.6g_seed%llu", param.c_str(), v,
                                                           static_cast<unsigned long long>(s));
                                             experiment::write_record(out / (std::string(name) + ".jsonl"), r.record);
                                             runs.push_back(std::string(name) + ".jsonl");
                                             std::cout << name << ": mIoU " << pct(r.record.rows.back().miou) << "\n";
                                           });
  write_text(out / "sweep.json", experiment::sweep_to_json(table) + "\n");
  json m = manifest_base("sweep", cfg, data.provenance);
  m["param"] = param;
  m["grid"] = grid;
  m["seeds"] = seeds;
  m["artifacts"] = {{"table", "sweep.json"}, {"runs", runs}};
  write_text(out / "manifest.json", m.dump(2) + "\n");
  std::cout << param << "\tmedian_mIoU\tmedian_mIoU*\tmedian_recall\n";
  for (const auto& c : table.cells) {
    std::cout << c.value << "\t" << pct(c.median_miou) << "\t" << pct(c.median_miou_subset) << "\t"
              << pct(c.median_recall) << "\n";
  }
  if (table.recall_non_increasing) {
    std::cout << "pseudo-label recall non-increasing over the grid: " << (*table.recall_non_increasing ? "yes" : "no")
              << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const DataOptions& data_opts, const std::string& split,
             std::vector<int> subset, double k, double T, const std::string& json_out) {
  if (!fs::exists(checkpoint)) throw std::invalid_argument("checkpoint not found: " + checkpoint);
  const auto nets = nets::load_checkpoint(checkpoint);
  const auto data = load_data(data_opts, json::object());
  const int C = nets.seg.config().num_classes;
  if (data.ds.spec.C != C) {
    throw std::invalid_argument("checkpoint has " + std::to_string(C) + " classes, dataset has " +
                                std::to_string(data.ds.spec.C));
  }
  for (int c : subset) {
    if (c < 0 || c >= C) throw std::invalid_argument("subset class out of range");
  }
  const auto ev = train::evaluate(nets.seg, data.ds.split(synth::parse_split(split)), subset, k, T);
  for (int c = 0; c < C; ++c) std::cout << "class " << c << "\tIoU " << pct(ev.iou[c]) << "\n";
  std::cout << "mIoU " << pct(ev.miou) << "\nmIoU* " << pct(ev.miou_subset) << "\n";
  if (!json_out.empty()) {
    json iou = json::array();
    for (const auto& v : ev.iou) iou.push_back(v ? json(*v) : json(nullptr));
    json j = {{"split", split},
              {"iou", iou},
              {"miou", ev.miou},
              {"miou_subset", ev.miou_subset ? json(*ev.miou_subset) : json(nullptr)},
              {"pseudo_precision", ev.pseudo.micro.precision ? json(*ev.pseudo.micro.precision) : json(nullptr)},
              {"pseudo_recall", ev.pseudo.micro.recall ? json(*ev.pseudo.micro.recall) : json(nullptr)}};
    write_text(json_out, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& records, const std::vector<std::string>& sweeps, const fs::path& out) {
  if (records.empty() && sweeps.empty()) throw std::invalid_argument("plot needs --records and/or --sweep inputs");
  ensure_dir(out);
  std::vector<std::pair<std::string, train::RunRecord>> runs;
  for (const auto& r : records) {
    auto rec = experiment::read_record(r);
    const std::string stem = fs::path(r).stem().string();
    write_text(out / ("per_class_" + stem + ".svg"), experiment::per_class_svg(rec.rows.back()));
    runs.emplace_back(stem, std::move(rec));
  }
  if (!runs.empty()) write_text(out / "training_curve.svg", experiment::training_curve_svg(runs));
  for (const auto& s : sweeps) {
    std::ifstream is(s);
    if (!is) throw std::invalid_argument("cannot read " + s);
    std::stringstream ss;
    ss << is.rdbuf();
    const auto t = experiment::sweep_from_json(ss.str());
    write_text(out / ("sweep_" + std::string(experiment::sweep_param_name(t.param)) + ".svg"),
               experiment::sweep_svg(t));
  }
  std::cout << "wrote figures to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-label domain adaptation for segmentation on a synthetic benchmark"};
  app.set_version_flag("--version", std::string(experiment::kToolVersion));
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a two-domain synthetic dataset");
  std::string gen_out, gen_preset = "large_gap", gen_config;
  synth::BenchmarkSpec gen_spec;
  std::vector<double> gen_rarity;
  gen->add_option("--out-dir", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_spec.seed, "benchmark seed");
  gen->add_option("--height", gen_spec.H, "image height");
  gen->add_option("--width", gen_spec.W, "image width");
  gen->add_option("--classes", gen_spec.C, "category count including background");
  gen->add_option("--rarity", gen_rarity, "per-class appearance probability, each in (0, 1]");
  gen->add_option("--n-source", gen_spec.n_source, "source training scenes");
  gen->add_option("--n-target", gen_spec.n_target, "target training scenes");
  gen->add_option("--n-val", gen_spec.n_val, "validation scenes per domain");
  gen->add_option("--preset", gen_preset, "target domain shift")->check(CLI::IsMember({"large_gap", "none"}));
  gen->add_option("--config", gen_config, "JSON with spec/benchmark keys; overrides flags");

  // train
  auto* tr = app.add_subcommand("train", "train one configuration");
  TrainFlags tr_flags;
  std::optional<std::uint64_t> tr_seed;
  add_train_flags(tr, tr_flags);
  tr->add_option("--seed", tr_seed, "training seed");

  // sweep
  auto* sw = app.add_subcommand("sweep", "one run per (grid value, seed); median table");
  TrainFlags sw_flags;
  std::string sw_param = "T";
  std::vector<double> sw_grid;
  std::vector<std::uint64_t> sw_seeds = {0, 1, 2, 3, 4};
  add_train_flags(sw, sw_flags);
  sw->add_option("--param", sw_param, "T | lambda_c | lambda_adv | points");
  sw->add_option("--grid", sw_grid, "values of the swept parameter");
  sw->add_option("--seeds", sw_seeds, "training seeds");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_split = "target_val", ev_json;
  std::vector<int> ev_subset;
  double ev_k = 1.0, ev_T = 0.2;
  DataOptions ev_data;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--dataset", ev_data.dataset, "dataset directory (default: generate)");
  ev->add_option("--data-seed", ev_data.data_seed, "benchmark seed when generating");
  ev->add_option("--split", ev_split, "source | target | source_val | target_val")
      ->check(CLI::IsMember({"source", "target", "source_val", "target_val"}));
  ev->add_option("--subset", ev_subset, "classes of the reduced mean (default 1..C-1)");
  ev->add_option("--k", ev_k, "smooth-max sharpness for the pseudo-label report");
  ev->add_option("--T", ev_T, "threshold for the pseudo-label report");
  ev->add_option("--json", ev_json, "also write the report as JSON");

  // plot
  auto* pl = app.add_subcommand("plot", "render SVG figures from records and sweep tables");
  std::vector<std::string> pl_records, pl_sweeps;
  std::string pl_out;
  pl->add_option("--records", pl_records, "record files (JSON lines)");
  pl->add_option("--sweep", pl_sweeps, "sweep tables written by 'sweep'");
  pl->add_option("--out-dir", pl_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(gen_out, gen_spec, gen_rarity, gen_preset, gen_config);
    if (*tr) return cmd_train(tr_flags, tr_seed);
    if (*sw) return cmd_sweep(sw_flags, sw_param, sw_grid, sw_seeds);
    if (*ev) return cmd_eval(ev_ckpt, ev_data, ev_split, ev_subset, ev_k, ev_T, ev_json);
    if (*pl) return cmd_plot(pl_records, pl_sweeps, pl_out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
