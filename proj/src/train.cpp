#include "h3d/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include "json.hpp"

namespace h3d {

void TrainConfig::validate() const {
  loss.validate();
  if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train config: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train config: momentum must lie in [0, 1)");
  if (batch_size <= 0) throw std::invalid_argument("train config: batch_size must be positive");
  if (train_scenes <= 0 || val_scenes <= 0) throw std::invalid_argument("train config: scene counts must be positive");
  if (!(pos_iou > 0.0 && pos_iou <= 1.0) || !(neg_iou > 0.0) || !(pos_iou > neg_iou)) {
    throw std::invalid_argument("train config: need 0 < neg_iou < pos_iou <= 1");
  }
  if (hidden <= 0) throw std::invalid_argument("train config: hidden must be positive");
  if (!(score_thr >= 0.0)) throw std::invalid_argument("train config: score_thr must be >= 0");
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw std::invalid_argument("train config: nms_iou must lie in [0, 1]");
}

std::vector<AnchorTarget> assign_targets(const Scene& scene, double pos_iou, double neg_iou) {
  if (!(pos_iou > neg_iou) || !(neg_iou >= 0.0) || !(pos_iou <= 1.0)) {
    throw std::invalid_argument("assign_targets: need 0 <= neg_iou < pos_iou <= 1");
  }
  const std::size_t na = scene.num_anchors();
  const std::size_t ng = scene.gt_boxes.size();
  std::vector<AnchorTarget> out(na);
  std::vector<double> gt_best(ng, -1.0);
  std::vector<int> gt_best_anchor(ng, -1);
  for (std::size_t a = 0; a < na; ++a) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < ng; ++g) {
      const double iou = bev_iou(scene.anchors[a], scene.gt_boxes[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
      if (iou > gt_best[g]) {
        gt_best[g] = iou;
        gt_best_anchor[g] = static_cast<int>(a);
      }
    }
    AnchorTarget& t = out[a];
    t.iou = best_iou;
    if (best >= 0 && best_iou >= pos_iou) {
      t.label = AnchorLabel::Positive;
      t.gt = best;
    } else if (best_iou < neg_iou) {
      t.label = AnchorLabel::Negative;
    } else {
      t.label = AnchorLabel::Ignored;
    }
  }
  for (std::size_t g = 0; g < ng; ++g) {
    const int a = gt_best_anchor[g];
    if (a < 0 || gt_best[g] <= 0.0) continue;
    AnchorTarget& t = out[static_cast<std::size_t>(a)];
    if (t.label == AnchorLabel::Positive && t.gt != static_cast<int>(g) && t.iou >= gt_best[g]) continue;
    t.label = AnchorLabel::Positive;
    t.gt = static_cast<int>(g);
    t.iou = gt_best[g];
  }
  return out;
}

BatchStats batch_loss(const ToyModel& m, const std::vector<const TrainScene*>& batch, const TrainConfig& cfg,
                      ToyModel* grad) {
  BatchStats st;
  for (const TrainScene* ts : batch) {
    for (const auto& t : ts->targets) st.positives += t.label == AnchorLabel::Positive;
  }
  const double norm = 1.0 / std::max(1, st.positives);

  ForwardCache cache;
  double d_out[kHeadDim];
  double total = 0.0;
  for (const TrainScene* ts : batch) {
    const Scene& scene = ts->scene;
    for (std::size_t a = 0; a < scene.num_anchors(); ++a) {
      const AnchorTarget& t = ts->targets[a];
      if (t.label == AnchorLabel::Ignored) continue;
      const double* x = scene.feature_row(a);
      const HeadOutput out = forward_one(m, x, &cache);
      std::fill(std::begin(d_out), std::end(d_out), 0.0);
      const double sp = out.p * (1.0 - out.p);
      if (t.label == AnchorLabel::Negative) {
        const double l = focal_loss_negative(out.p, cfg.loss);
        st.l_neg += l;
        st.negatives += 1;
        total += l;
        d_out[0] = norm * focal_loss_negative_grad(out.p, cfg.loss) * sp;
      } else {
        const Box3D& gt = scene.gt_boxes[static_cast<std::size_t>(t.gt)];
        const Box3D& anchor = scene.anchors[a];
        const BoxDelta target = regression_target(gt, anchor);
        LossSample s;
        s.p = out.p;
        s.p_gt = true;
        for (int k = 0; k < BoxDelta::kSize; ++k) s.delta[k] = out.delta[k] - target[k];
        s.p_dir = out.p_dir;
        s.p_dir_gt = direction_bit(gt.yaw);
        const LossTerms terms = loss_terms(s, cfg.loss);
        st.l_cls += terms.l_cls;
        st.l_reg += terms.l_reg;
        st.l_dir += terms.l_dir;
        if (!grad) {
          total += sample_loss(cfg.loss_kind, s, cfg.loss);
          continue;
        }
        const GradRecord r = sample_grads(cfg.loss_kind, s, cfg.loss);
        total += r.loss;
        d_out[0] = norm * r.d_p * sp;
        for (int k = 0; k < BoxDelta::kSize; ++k) d_out[1 + k] = norm * r.d_delta[static_cast<std::size_t>(k)];
        d_out[8] = norm * r.d_pdir * out.p_dir * (1.0 - out.p_dir);
      }
      if (grad) backward_one(m, x, cache, d_out, *grad);
    }
  }
  st.loss = total * norm;
  return st;
}

TrainScene make_train_scene(const SceneSpec& spec, std::uint64_t index, const TrainConfig& cfg) {
  TrainScene ts;
  ts.scene = gen_scene(spec, index);
  ts.targets = assign_targets(ts.scene, cfg.pos_iou, cfg.neg_iou);
  return ts;
}

namespace {

bool all_finite(const ToyModel& m) {
  for (const auto* v : {&m.w1, &m.b1, &m.w2, &m.b2}) {
    for (double x : *v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void sgd_step(ToyModel& m, ToyModel& velocity, const ToyModel& grad, double lr, double momentum) {
  auto step = [&](std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      w[i] -= lr * v[i];
    }
  };
  step(m.w1, velocity.w1, grad.w1);
  step(m.b1, velocity.b1, grad.b1);
  step(m.w2, velocity.w2, grad.w2);
  step(m.b2, velocity.b2, grad.b2);
}

// Offsets of the size channels are clamped before decoding so a wild
// prediction cannot overflow exp.
constexpr double kMaxLogScale = 4.0;

}  // namespace

TrainResult train(const TrainConfig& cfg, const SceneSpec& spec) {
  cfg.validate();
  spec.validate();
  std::vector<TrainScene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.train_scenes));
  for (int i = 0; i < cfg.train_scenes; ++i) scenes.push_back(make_train_scene(spec, static_cast<std::uint64_t>(i), cfg));
  std::vector<Scene> val;
  val.reserve(static_cast<std::size_t>(cfg.val_scenes));
  for (int i = 0; i < cfg.val_scenes; ++i) val.push_back(gen_scene(spec, kValidationOffset + static_cast<std::uint64_t>(i)));

  TrainResult res;
  res.model = ToyModel::init(kFeatureDim, cfg.hidden, cfg.seed);
  ToyModel velocity = ToyModel::zeros(kFeatureDim, cfg.hidden);
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eed5eedULL);
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0, cls = 0.0, reg = 0.0, dir = 0.0, neg = 0.0;
    int positives = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const TrainScene*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++k) {
        batch.push_back(&scenes[order[k]]);
      }
      ToyModel grad = ToyModel::zeros(kFeatureDim, cfg.hidden);
      const BatchStats st = batch_loss(res.model, batch, cfg, &grad);
      if (!std::isfinite(st.loss) || !all_finite(grad)) {
        throw TrainDivergence(fmt::format("training diverged in epoch {} at scene offset {} (batch loss {})", epoch,
                                          start, st.loss));
      }
      sgd_step(res.model, velocity, grad, cfg.lr, cfg.momentum);
      total += st.loss * std::max(1, st.positives);
      cls += st.l_cls;
      reg += st.l_reg;
      dir += st.l_dir;
      neg += st.l_neg;
      positives += st.positives;
    }
    if (!all_finite(res.model)) throw TrainDivergence(fmt::format("training diverged in epoch {}: non-finite parameters", epoch));
    const double n = std::max(1, positives);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = total / n;
    rec.l_cls = cls / n;
    rec.l_reg = reg / n;
    rec.l_dir = dir / n;
    rec.l_neg = neg / n;
    const EvalSummary s = validate_model(res.model, val, cfg);
    rec.val_ap_07 = s.at(0.7).ap;
    rec.val_ap_05 = s.at(0.5).ap;
    rec.val_aos_07 = s.at(0.7).aos;
    rec.val_pearson_r = s.pearson_r;
    res.history.push_back(rec);
  }
  return res;
}

std::vector<Detection> predict(const ToyModel& m, const Scene& scene, double score_thr, double nms_iou) {
  if (std::isnan(score_thr) || score_thr < 0.0) throw std::invalid_argument("predict: score_thr must be >= 0");
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw std::invalid_argument("predict: nms_iou must lie in [0, 1]");
  const std::vector<HeadOutput> outs = forward(m, scene);
  std::vector<Detection> cands;
  for (std::size_t a = 0; a < outs.size(); ++a) {
    const HeadOutput& o = outs[a];
    if (!(o.p >= score_thr)) continue;
    BoxDelta d = o.delta;
    d.dw = std::clamp(d.dw, -kMaxLogScale, kMaxLogScale);
    d.dl = std::clamp(d.dl, -kMaxLogScale, kMaxLogScale);
    d.dh = std::clamp(d.dh, -kMaxLogScale, kMaxLogScale);
    Box3D box = decode_box(d, scene.anchors[a]);
    if (direction_bit(box.yaw) != (o.p_dir >= 0.5)) box.yaw = wrap_angle(box.yaw + kPi);
    cands.push_back({box, o.p});
  }
  return nms(cands, nms_iou, IouKind::Bev);
}

EvalSummary validate_model(const ToyModel& m, const std::vector<Scene>& scenes, const TrainConfig& cfg) {
  std::vector<FrameResult> frames;
  frames.reserve(scenes.size());
  for (const auto& s : scenes) frames.push_back({s.gt_boxes, predict(m, s, cfg.score_thr, cfg.nms_iou)});
  return evaluate(frames, {0.7, 0.5}, IouKind::Bev);
}

std::string history_json(const TrainConfig& cfg, const std::vector<EpochRecord>& history) {
  using nlohmann::json;
  json j;
  j["loss_kind"] = to_string(cfg.loss_kind);
  j["seed"] = cfg.seed;
  json rows = json::array();
  for (const auto& r : history) {
    rows.push_back({{"epoch", r.epoch},
                    {"loss", r.loss},
                    {"l_cls", r.l_cls},
                    {"l_reg", r.l_reg},
                    {"l_dir", r.l_dir},
                    {"l_neg", r.l_neg},
                    {"val_ap_07", r.val_ap_07},
                    {"val_ap_05", r.val_ap_05},
                    {"val_aos_07", r.val_aos_07},
                    {"val_pearson_r", r.val_pearson_r ? json(*r.val_pearson_r) : json(nullptr)}});
  }
  j["epochs"] = rows;
  return j.dump(2) + "\n";
}

std::vector<BenchRow> run_benchmark(const TrainConfig& cfg, const SceneSpec& spec, const std::vector<std::uint64_t>& seeds) {
  std::vector<BenchRow> rows;
  for (std::uint64_t s : seeds) {
    SceneSpec sp = spec;
    sp.seed = s;
    std::vector<Scene> val;
    for (int i = 0; i < cfg.val_scenes; ++i) val.push_back(gen_scene(sp, kValidationOffset + static_cast<std::uint64_t>(i)));
    for (LossKind kind : {LossKind::Baseline, LossKind::Harmonic}) {
      TrainConfig c = cfg;
      c.seed = s;
      c.loss_kind = kind;
      const TrainResult res = train(c, sp);
      const EvalSummary sum = validate_model(res.model, val, c);
      rows.push_back({s, kind, sum.at(0.7).ap, sum.at(0.5).ap, sum.at(0.7).aos, sum.pearson_r});
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "seed,loss_kind,ap_07,ap_05,aos_07,pearson_r\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{}\n", r.seed, to_string(r.kind), r.ap_07, r.ap_05, r.aos_07,
                       r.pearson_r ? fmt::format("{:.6f}", *r.pearson_r) : std::string("NA"));
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BenchVerdict bench_verdict(const std::vector<BenchRow>& rows) {
  std::vector<double> rb, rh, ab, ah;
  for (const auto& r : rows) {
    auto& rr = r.kind == LossKind::Baseline ? rb : rh;
    auto& aa = r.kind == LossKind::Baseline ? ab : ah;
    if (r.pearson_r) rr.push_back(*r.pearson_r);
    aa.push_back(r.ap_07);
  }
  if (ab.empty() || ah.empty()) throw std::invalid_argument("bench_verdict: need rows for both loss kinds");
  BenchVerdict v;
  if (!rb.empty()) v.median_r_baseline = median(rb);
  if (!rh.empty()) v.median_r_harmonic = median(rh);
  v.median_ap07_baseline = median(ab);
  v.median_ap07_harmonic = median(ah);
  v.consistency_ok = v.median_r_baseline && v.median_r_harmonic && *v.median_r_harmonic >= *v.median_r_baseline;
  v.accuracy_ok = v.median_ap07_harmonic >= v.median_ap07_baseline - 0.02;
  return v;
}

}  // namespace h3d
