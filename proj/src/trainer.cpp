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

#include "wdaseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wdaseg/rng.hpp"

namespace wdaseg::train {
namespace {

// Stream tags for derive_seed.
enum : std::uint64_t {
  kTagInit = 1,
  kTagSourceBatch = 2,
  kTagTargetBatch = 3,
  kTagDropout = 4,
  kTagPoints = 5,
};

bool adaptation_phase(const TrainConfig& cfg, int iteration) {
  return uses_weak_labels(cfg.mode) && iteration >= cfg.warmup_iters;
}

std::vector<std::size_t> draw_indices(std::uint64_t seed, std::uint64_t tag, int iteration, int batch,
                                      std::size_t population) {
  if (population == 0) throw std::invalid_argument("training split is empty");
  Rng rng(derive_seed(seed, {tag, static_cast<std::uint64_t>(iteration)}));
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.below(static_cast<std::uint64_t>(population));
  return idx;
}

void require_finite(double v, const char* what, int iteration) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("non-finite ") + what + " loss at iteration " + std::to_string(iteration));
  }
}

// O is a softmax of A, so finite F and A imply finite outputs.
void require_finite(const nets::SegCache& c, int iteration) {
  for (const Tensor* t : {&c.out.F, &c.out.A}) {
    if (!std::all_of(t->v.begin(), t->v.end(), [](double v) { return std::isfinite(v); })) {
      throw NumericalError("non-finite network output at iteration " + std::to_string(iteration));
    }
  }
}

// -log(p) toward label 1 or -log(1 - p) toward label 0, with the clamp guard.
// Returns the value and writes d/dp.
double bce(double p, bool label, double& dp) {
  const double q = losses::clamp_prob(p);
  const bool clamped = q != p;
  if (label) {
    dp = clamped ? 0.0 : -1.0 / q;
    return -std::log(q);
  }
  dp = clamped ? 0.0 : 1.0 / (1.0 - q);
  return -std::log(1.0 - q);
}

void add_into(Tensor& t, int b, const Grid& g, double scale) {
  auto dst = t.image_span(b);
  for (std::size_t i = 0; i < g.v.size(); ++i) dst[i] += scale * g.v[i];
}

void check_grads(const ParamSet& ps, int iteration) {
  for (const auto& p : ps.all()) {
    for (double g : p.grad) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in " + p.name + " at iteration " + std::to_string(iteration));
      }
    }
  }
}

}  // namespace

losses::MapLoss point_term(const OutputMap& O, const PointLabelSet& points) {
  losses::MapLoss out{0.0, Grid(O.h, O.w, O.c)};
  std::vector<int> count(O.c, 0);
  for (const auto& pt : points) {
    if (pt.category < 0 || pt.category >= O.c) throw std::invalid_argument("point_term: category out of range");
    ++count[pt.category];
  }
  for (int c = 0; c < O.c; ++c) {
    if (count[c] == 0) continue;
    PointLabelSet mine;
    for (const auto& pt : points)
      if (pt.category == c) mine.push_back(pt);
    const auto pl = losses::point_loss(O, mine);
    const double w = 1.0 / count[c];
    out.value += w * pl.value;
    for (std::size_t i = 0; i < pl.grad.v.size(); ++i) out.grad.v[i] += w * pl.grad.v[i];
  }
  return out;
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::source_only: return "source_only";
    case Mode::baseline: return "baseline";
    case Mode::uda_weak: return "uda_weak";
    case Mode::wda_image: return "wda_image";
    case Mode::wda_point: return "wda_point";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::source_only, Mode::baseline, Mode::uda_weak, Mode::wda_image, Mode::wda_point}) {
    if (name == mode_name(m)) return m;
  }
  throw std::invalid_argument("unknown mode: " + name);
}

bool uses_weak_labels(Mode m) { return m == Mode::uda_weak || m == Mode::wda_image || m == Mode::wda_point; }

void TrainConfig::validate() const {
  weights.validate();
  if (!(lambda_point >= 0.0) || !std::isfinite(lambda_point)) throw std::invalid_argument("lambda_point must be >= 0");
  if (points_per_class < 1) throw std::invalid_argument("points_per_class must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (!(lr_G > 0.0) || !(lr_D > 0.0)) throw std::invalid_argument("learning rates must be > 0");
  if (!(poly_power >= 0.0)) throw std::invalid_argument("poly_power must be >= 0");
  if (!(grad_clip_G >= 0.0) || !std::isfinite(grad_clip_G)) throw std::invalid_argument("grad_clip_G must be >= 0");
  if (warmup_iters < 0 || total_iters < warmup_iters) {
    throw std::invalid_argument("iterations must satisfy total_iters >= warmup_iters >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (eval_interval < 1) throw std::invalid_argument("eval_interval must be >= 1");
  net.validate();
  for (int c : subset) {
    if (c < 0 || c >= net.num_classes) throw std::invalid_argument("subset class out of range");
  }
}

TrainConfig default_config(Mode m) {
  TrainConfig cfg;
  cfg.mode = m;
  if (m == Mode::uda_weak) {
    cfg.weights.lambda_c = 0.01;
    cfg.dropout = 0.3;
  } else if (m == Mode::wda_image || m == Mode::wda_point) {
    cfg.weights.lambda_c = 0.2;
    cfg.dropout = 0.1;
  }
  return cfg;
}

double poly_lr(int iter, double base_lr, int total_iters, double power) {
  if (iter < 0 || iter > total_iters) throw std::invalid_argument("poly_lr: iteration out of range");
  if (total_iters == 0) return base_lr;
  return base_lr * std::pow(1.0 - static_cast<double>(iter) / total_iters, power);
}

TrainState init_state(const TrainConfig& cfg) {
  TrainState st;
  st.nets = nets::init_networks(cfg.net, derive_seed(cfg.seed, {kTagInit}));
  return st;
}

WeakSupervision acquire_weak_labels(const TrainConfig& cfg, const Tensor& A_target,
                                    const std::vector<LabelMap>& masks,
                                    const std::vector<std::size_t>& scene_indices) {
  const int C = cfg.net.num_classes;
  WeakSupervision ws;
  switch (cfg.mode) {
    case Mode::uda_weak:
      for (int b = 0; b < A_target.n; ++b) {
        const auto sm = losses::smooth_max_pool(A_target.image(b), cfg.weights.k);
        ws.labels.push_back(losses::pseudo_weak_labels(sm.prob, cfg.weights.T));
      }
      break;
    case Mode::wda_image:
    case Mode::wda_point:
      for (const auto& Y : masks) ws.labels.push_back(synth::weak_from_mask(Y, C));
      if (cfg.mode == Mode::wda_point) {
        if (scene_indices.size() != masks.size()) throw std::invalid_argument("acquire_weak_labels: index count mismatch");
        for (std::size_t b = 0; b < masks.size(); ++b) {
          ws.points.push_back(synth::n_points_from_mask(masks[b], C, cfg.points_per_class,
                                                        derive_seed(cfg.seed, {kTagPoints, scene_indices[b]})));
        }
      }
      break;
    default:
      throw std::invalid_argument(std::string("acquire_weak_labels: mode ") + mode_name(cfg.mode) +
                                  " has no weak labels");
  }
  return ws;
}

StepInputs prepare_step(const TrainConfig& cfg, const TrainState& st, const synth::Dataset& ds, int iteration) {
  StepInputs in;
  in.iteration = iteration;
  const auto& seg = st.nets.seg;
  in.source = synth::make_batch(
      ds.source, draw_indices(cfg.seed, kTagSourceBatch, iteration, cfg.batch_size, ds.source.size()));
  in.fwd_source = seg.forward_cached(in.source.X);
  require_finite(in.fwd_source, iteration);
  if (cfg.mode == Mode::source_only) return in;

  in.target = synth::make_batch(
      ds.target, draw_indices(cfg.seed, kTagTargetBatch, iteration, cfg.batch_size, ds.target.size()));
  in.fwd_target = seg.forward_cached(in.target.X);
  require_finite(*in.fwd_target, iteration);
  if (adaptation_phase(cfg, iteration)) {
    for (const auto& Y : in.source.Y) in.source_labels.push_back(synth::weak_from_mask(Y, cfg.net.num_classes));
    in.target_weak = acquire_weak_labels(cfg, in.fwd_target->out.A, in.target.Y, in.target.indices);
  }
  return in;
}

void train_step_D(const TrainConfig& cfg, TrainState& st, const StepInputs& in, LossComponents& out) {
  if (cfg.mode == Mode::source_only) return;
  const int B = in.source.X.n;
  const double lr = poly_lr(in.iteration, cfg.lr_D, cfg.total_iters, cfg.poly_power);

  if (cfg.weights.lambda_out > 0.0) {
    auto& od = st.nets.out_disc;
    od.params().zero_grad();
    nets::OutDiscCache cs, ct;
    const auto ps = od.forward(in.fwd_source.out.O, cs);
    const auto pt = od.forward(in.fwd_target->out.O, ct);
    std::vector<double> gs(B), gt(B);
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
      loss += bce(ps[b], true, gs[b]) + bce(pt[b], false, gt[b]);
      gs[b] /= B;
      gt[b] /= B;
    }
    loss /= B;
    require_finite(loss, "output discriminator", in.iteration);
    od.backward(cs, gs);
    od.backward(ct, gt);
    check_grads(od.params(), in.iteration);
    st.opt_out.step(od.params(), lr);
    out.out_disc = loss;
  }

  if (in.target_weak && cfg.weights.lambda_adv > 0.0) {
    auto& bank = st.nets.bank;
    const int C = bank.classes();
    bank.params().zero_grad();
    std::vector<bool> present(C, false);
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
      const auto& ys = in.source_labels[b];
      const auto& yt = in.target_weak->labels[b];
      const auto& fs = in.fwd_source.out;
      const auto& ft = in.fwd_target->out;
      nets::BankCache cs, ct;
      const auto ds = bank.forward(losses::category_pool(fs.F.image(b), fs.A.image(b)), cs);
      const auto dt = bank.forward(losses::category_pool(ft.F.image(b), ft.A.image(b)), ct);
      auto dl = losses::discriminator_domain_loss(ds, dt, ys, yt);
      for (int c = 0; c < C; ++c) {
        present[c] = present[c] || ys[c] || yt[c];
        dl.d_source[c] /= B;
        dl.d_target[c] /= B;
      }
      loss += dl.value / B;
      bank.backward(cs, dl.d_source);
      bank.backward(ct, dl.d_target);
    }
    require_finite(loss, "category discriminator", in.iteration);
    check_grads(bank.params(), in.iteration);
    std::vector<bool> active(bank.params().all().size(), false);
    for (int c = 0; c < C; ++c) {
      if (!present[c]) continue;
      for (const auto& name : bank.param_names(c)) {
        const auto& all = bank.params().all();
        for (std::size_t i = 0; i < all.size(); ++i) {
          if (all[i].name == name) active[i] = true;
        }
      }
    }
    st.opt_bank.step(bank.params(), lr, &active);
    out.disc = loss;
  }
}

void train_step_G(const TrainConfig& cfg, TrainState& st, const StepInputs& in, LossComponents& out) {
  auto& seg = st.nets.seg;
  const int B = in.source.X.n;
  const int it = in.iteration;
  const double lr = poly_lr(it, cfg.lr_G, cfg.total_iters, cfg.poly_power);
  seg.params().zero_grad();

  const auto& fs = in.fwd_source.out;
  Tensor dO_s(fs.O.n, fs.O.h, fs.O.w, fs.O.c);
  double ls = 0.0;
  for (int b = 0; b < B; ++b) {
    const auto ce = losses::segmentation_ce(fs.O.image(b), in.source.Y[b]);
    ls += ce.value / B;
    add_into(dO_s, b, ce.grad, 1.0 / B);
  }
  require_finite(ls, "segmentation", it);
  out.seg = ls;

  bool target_grad = false;
  Tensor dF_t, dA_t, dO_t;
  if (in.fwd_target) {
    const auto& ft = in.fwd_target->out;
    dF_t = Tensor(ft.F.n, ft.F.h, ft.F.w, ft.F.c);
    dA_t = Tensor(ft.A.n, ft.A.h, ft.A.w, ft.A.c);
    dO_t = Tensor(ft.O.n, ft.O.h, ft.O.w, ft.O.c);
    const auto& w = cfg.weights;

    if (w.lambda_out > 0.0) {
      auto& od = st.nets.out_disc;
      nets::OutDiscCache cache;
      const auto pt = od.forward(ft.O, cache);
      std::vector<double> g(B);
      double loss = 0.0;
      for (int b = 0; b < B; ++b) {
        loss += bce(pt[b], true, g[b]) / B;
        g[b] *= w.lambda_out / B;
      }
      require_finite(loss, "output adversarial", it);
      const Tensor d = od.backward(cache, g);
      for (std::size_t i = 0; i < d.v.size(); ++i) dO_t.v[i] += d.v[i];
      out.out = loss;
      target_grad = true;
    }

    if (in.target_weak) {
      const auto& yt = in.target_weak->labels;
      if (w.lambda_c > 0.0) {
        double loss = 0.0;
        const double keep = 1.0 - cfg.dropout;
        for (int b = 0; b < B; ++b) {
          Grid A = ft.A.image(b);
          std::vector<double> mask;
          if (cfg.dropout > 0.0) {
            Rng rng(derive_seed(cfg.seed, {kTagDropout, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(b)}));
            mask.resize(A.v.size());
            for (std::size_t i = 0; i < A.v.size(); ++i) {
              mask[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
              A.v[i] *= mask[i];
            }
          }
          const auto sm = losses::smooth_max_pool(A, w.k);
          auto bl = losses::weak_label_bce(sm.prob, yt[b]);
          loss += bl.value / B;
          for (auto& g : bl.grad) g *= w.lambda_c / B;
          Grid dA = losses::smooth_max_pool_backward(A, w.k, sm, bl.grad);
          if (!mask.empty()) {
            for (std::size_t i = 0; i < dA.v.size(); ++i) dA.v[i] *= mask[i];
          }
          add_into(dA_t, b, dA, 1.0);
        }
        require_finite(loss, "classification", it);
        out.cls = loss;
        target_grad = true;
      }

      if (w.lambda_adv > 0.0) {
        auto& bank = st.nets.bank;
        double loss = 0.0;
        for (int b = 0; b < B; ++b) {
          const Grid F = ft.F.image(b), A = ft.A.image(b);
          nets::BankCache cache;
          const auto dt = bank.forward(losses::category_pool(F, A), cache);
          auto al = losses::adversarial_loss(dt, yt[b]);
          loss += al.value / B;
          for (auto& g : al.grad) g *= w.lambda_adv / B;
          const auto dfeat = bank.backward(cache, al.grad);
          const auto pg = losses::category_pool_backward(F, A, dfeat);
          add_into(dF_t, b, pg.dF, 1.0);
          add_into(dA_t, b, pg.dA, 1.0);
        }
        require_finite(loss, "category adversarial", it);
        out.adv = loss;
        target_grad = true;
      }

      if (cfg.mode == Mode::wda_point && cfg.lambda_point > 0.0) {
        double loss = 0.0;
        for (int b = 0; b < B; ++b) {
          const auto pl = point_term(ft.O.image(b), in.target_weak->points[b]);
          loss += pl.value / B;
          add_into(dO_t, b, pl.grad, cfg.lambda_point / B);
        }
        require_finite(loss, "point", it);
        out.point = loss;
        target_grad = true;
      }
    }
  }

  seg.backward(in.fwd_source, {}, {}, dO_s);
  if (target_grad) seg.backward(*in.fwd_target, dF_t, dA_t, dO_t);
  check_grads(seg.params(), it);
  if (cfg.grad_clip_G > 0.0) clip_grad_norm(seg.params(), cfg.grad_clip_G);
  st.opt_G.step(seg.params(), lr);
}

EvalResult evaluate(const nets::SegNet& net, const std::vector<synth::Scene>& scenes,
                    const std::vector<int>& subset, double k, double T, int batch_size) {
  const int C = net.config().num_classes;
  if (scenes.empty()) throw std::invalid_argument("evaluate: no scenes");
  if (batch_size < 1) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  EvalResult r{metrics::ConfusionMatrix(C), {}, 0.0, std::nullopt, {}};
  std::vector<WeakLabel> pred_y, true_y;
  for (std::size_t start = 0; start < scenes.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(scenes.size(), start + batch_size); ++i) idx.push_back(i);
    const auto batch = synth::make_batch(scenes, idx);
    const auto out = net.forward(batch.X);
    for (int b = 0; b < batch.X.n; ++b) {
      for (auto v : batch.Y[b].v) {
        if (v >= C) throw std::invalid_argument("evaluate: mask class exceeds the network's class count");
      }
      r.cm.accumulate(metrics::argmax_labels(out.O, b), batch.Y[b]);
      const auto sm = losses::smooth_max_pool(out.A.image(b), k);
      pred_y.push_back(losses::pseudo_weak_labels(sm.prob, T));
      true_y.push_back(synth::weak_from_mask(batch.Y[b], C));
    }
  }
  r.iou = metrics::per_class_iou(r.cm);
  r.miou = metrics::mean_iou(r.cm);
  std::vector<int> sub = subset;
  if (sub.empty()) {
    for (int c = 1; c < C; ++c) sub.push_back(c);
  }
  if (!sub.empty()) {
    try {
      r.miou_subset = metrics::mean_iou(r.cm, sub);
    } catch (const std::invalid_argument&) {
      // every class of the subset is absent from both prediction and truth
    }
  }
  r.pseudo = metrics::weak_label_pr(pred_y, true_y);
  return r;
}

namespace {

struct LossAccumulator {
  double sum[7] = {};
  int count[7] = {};

  static std::optional<double>* slot(LossComponents& l, int i) {
    std::optional<double>* s[7] = {&l.seg, &l.cls, &l.adv, &l.out, &l.point, &l.disc, &l.out_disc};
    return s[i];
  }

  void add(LossComponents l) {
    for (int i = 0; i < 7; ++i) {
      if (const auto* v = slot(l, i); v->has_value()) {
        sum[i] += **v;
        ++count[i];
      }
    }
  }

  LossComponents mean_and_reset() {
    LossComponents out;
    for (int i = 0; i < 7; ++i) {
      if (count[i] > 0) *slot(out, i) = sum[i] / count[i];
      sum[i] = 0.0;
      count[i] = 0;
    }
    return out;
  }
};

}  // namespace

RunResult run_experiment(const TrainConfig& cfg, const synth::Dataset& ds, const StepObserver& observer) {
  cfg.validate();
  if (ds.spec.C != cfg.net.num_classes) {
    throw std::invalid_argument("dataset has " + std::to_string(ds.spec.C) + " classes, network expects " +
                                std::to_string(cfg.net.num_classes));
  }
  if (ds.target_val.empty()) throw std::invalid_argument("dataset has no target_val scenes");
  TrainState st = init_state(cfg);
  RunRecord rec;
  LossAccumulator acc;

  auto log_row = [&](int completed, int lr_iter) {
    const auto ev = evaluate(st.nets.seg, ds.target_val, cfg.subset, cfg.weights.k, cfg.weights.T);
    EvalRow row;
    row.iteration = completed;
    row.lr_G = poly_lr(lr_iter, cfg.lr_G, cfg.total_iters, cfg.poly_power);
    row.lr_D = poly_lr(lr_iter, cfg.lr_D, cfg.total_iters, cfg.poly_power);
    row.iou = ev.iou;
    row.miou = ev.miou;
    row.miou_subset = ev.miou_subset;
    row.pseudo_precision = ev.pseudo.micro.precision;
    row.pseudo_recall = ev.pseudo.micro.recall;
    row.loss = acc.mean_and_reset();
    rec.rows.push_back(std::move(row));
  };

  if (cfg.total_iters == 0) log_row(0, 0);
  for (int it = 0; it < cfg.total_iters; ++it) {
    const StepInputs in = prepare_step(cfg, st, ds, it);
    LossComponents lc;
    if (observer) observer(it, StepEvent::before_D, st.nets);
    train_step_D(cfg, st, in, lc);
    if (observer) observer(it, StepEvent::after_D, st.nets);
    if (observer) observer(it, StepEvent::before_G, st.nets);
    train_step_G(cfg, st, in, lc);
    if (observer) observer(it, StepEvent::after_G, st.nets);
    acc.add(lc);
    if ((it + 1) % cfg.eval_interval == 0 || it + 1 == cfg.total_iters) log_row(it + 1, it);
  }
  return {std::move(rec), std::move(st.nets)};
}

RunResult run_experiment(const TrainConfig& cfg, const synth::BenchmarkSpec& spec) {
  const auto ds = synth::make_dataset(spec, synth::source_domain(spec.C), synth::large_gap_domain(spec.C));
  return run_experiment(cfg, ds);
}

}  // namespace wdaseg::train
