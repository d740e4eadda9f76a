#include "h3d/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include "json.hpp"

namespace h3d {

const char* to_string(IouKind k) { return k == IouKind::Bev ? "bev" : "3d"; }

IouKind parse_iou_kind(const std::string& s) {
  if (s == "bev") return IouKind::Bev;
  if (s == "3d") return IouKind::Iou3d;
  throw std::invalid_argument("unknown iou kind '" + s + "' (expected bev|3d)");
}

double box_iou(const Box3D& a, const Box3D& b, IouKind kind) {
  return kind == IouKind::Bev ? bev_iou(a, b) : iou_3d(a, b);
}

namespace {

std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

struct SweepPoint {
  double score = 0.0;
  bool tp = false;
  double similarity = 0.0;  // orientation similarity of a TP
};

struct Sweep {
  std::vector<SweepPoint> points;  // pooled, descending score
  int num_gt = 0;
};

Sweep build_sweep(const std::vector<FrameResult>& frames, double iou_thr, IouKind kind) {
  Sweep sw;
  for (const auto& f : frames) {
    sw.num_gt += static_cast<int>(f.gts.size());
    const FrameMatch m = match_frame(f, iou_thr, kind);
    for (std::size_t i = 0; i < f.dets.size(); ++i) {
      const DetMatch& d = m.dets[i];
      sw.points.push_back({f.dets[i].score, d.tp, d.tp ? 0.5 * (1.0 + std::cos(d.dyaw)) : 0.0});
    }
  }
  std::stable_sort(sw.points.begin(), sw.points.end(),
                   [](const SweepPoint& a, const SweepPoint& b) { return a.score > b.score; });
  return sw;
}

constexpr int kRecallPositions = 40;

// Mean over k = 1..40 of the best weighted precision among sweep prefixes
// whose recall reaches k/40. `weighted` selects orientation similarity as the
// TP credit.
double interpolated_ap(const Sweep& sw, bool weighted) {
  if (sw.num_gt == 0) throw EvalError("average precision is undefined without ground truths");
  const std::size_t n = sw.points.size();
  std::vector<int> tp_cum(n);
  std::vector<double> precision(n);
  int tp = 0;
  double credit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sw.points[i].tp) {
      ++tp;
      credit += weighted ? sw.points[i].similarity : 1.0;
    }
    tp_cum[i] = tp;
    precision[i] = credit / static_cast<double>(i + 1);
  }
  // Max precision to the right, so the query for recall >= k/40 is one lookup.
  std::vector<double> best_right(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) best_right[i] = std::max(best_right[i + 1], precision[i]);

  double acc = 0.0;
  std::size_t i = 0;
  for (int k = 1; k <= kRecallPositions; ++k) {
    // recall_i >= k/40  <=>  40 * tp_i >= k * num_gt, kept in integers
    while (i < n && kRecallPositions * tp_cum[i] < k * sw.num_gt) ++i;
    if (i == n) break;
    acc += best_right[i];
  }
  return acc / kRecallPositions;
}

}  // namespace

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thr, IouKind kind) {
  if (!(iou_thr >= 0.0 && iou_thr <= 1.0)) throw std::invalid_argument("nms: iou_thr must lie in [0, 1]");
  std::vector<Detection> kept;
  for (std::size_t idx : score_order(dets)) {
    const Detection& d = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                        [&](const Detection& k) { return box_iou(k.box, d.box, kind) > iou_thr; });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

FrameMatch match_frame(const FrameResult& frame, double iou_thr, IouKind kind) {
  FrameMatch m;
  m.dets.resize(frame.dets.size());
  m.gt_matched.assign(frame.gts.size(), false);
  for (std::size_t idx : score_order(frame.dets)) {
    const Box3D& box = frame.dets[idx].box;
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < frame.gts.size(); ++g) {
      if (m.gt_matched[g]) continue;
      const double iou = box_iou(box, frame.gts[g], kind);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    DetMatch& d = m.dets[idx];
    if (best >= 0 && best_iou >= iou_thr) {
      d.tp = true;
      d.gt = best;
      d.iou = best_iou;
      d.dyaw = wrap_angle(box.yaw - frame.gts[static_cast<std::size_t>(best)].yaw);
      m.gt_matched[static_cast<std::size_t>(best)] = true;
    }
  }
  return m;
}

double ap40(const std::vector<FrameResult>& frames, double iou_thr, IouKind kind) {
  return interpolated_ap(build_sweep(frames, iou_thr, kind), false);
}

double aos40(const std::vector<FrameResult>& frames, double iou_thr, IouKind kind) {
  return interpolated_ap(build_sweep(frames, iou_thr, kind), true);
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: size mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> confidence_iou_correlation(const std::vector<FrameResult>& frames, IouKind kind,
                                                 double match_iou) {
  std::vector<double> scores, ious;
  for (const auto& f : frames) {
    const FrameMatch m = match_frame(f, match_iou, kind);
    for (std::size_t i = 0; i < f.dets.size(); ++i) {
      if (!m.dets[i].tp) continue;
      scores.push_back(f.dets[i].score);
      ious.push_back(m.dets[i].iou);
    }
  }
  return pearson(scores, ious);
}

const ThresholdMetrics& EvalSummary::at(double iou_thr) const {
  for (const auto& t : per_threshold) {
    if (std::abs(t.iou_thr - iou_thr) < 1e-12) return t;
  }
  throw std::out_of_range(fmt::format("no metrics at IoU threshold {}", iou_thr));
}

EvalSummary evaluate(const std::vector<FrameResult>& frames, const std::vector<double>& thresholds, IouKind kind) {
  EvalSummary s;
  s.kind = kind;
  for (const auto& f : frames) {
    s.num_gt += static_cast<int>(f.gts.size());
    s.num_det += static_cast<int>(f.dets.size());
  }
  for (double thr : thresholds) {
    if (!(thr >= 0.0 && thr <= 1.0)) throw std::invalid_argument("evaluate: thresholds must lie in [0, 1]");
    const Sweep sw = build_sweep(frames, thr, kind);
    ThresholdMetrics t;
    t.iou_thr = thr;
    t.ap = interpolated_ap(sw, false);
    t.aos = interpolated_ap(sw, true);
    for (const auto& p : sw.points) (p.tp ? t.tp : t.fp) += 1;
    t.fn = sw.num_gt - t.tp;
    s.per_threshold.push_back(t);
  }
  s.pearson_r = confidence_iou_correlation(frames, kind);
  return s;
}

std::string summary_json(const EvalSummary& s) {
  nlohmann::json j;
  j["iou_kind"] = to_string(s.kind);
  j["num_gt"] = s.num_gt;
  j["num_det"] = s.num_det;
  j["pearson_r"] = s.pearson_r ? nlohmann::json(*s.pearson_r) : nlohmann::json(nullptr);
  j["correlation_match_iou"] = kCorrelationMatchIou;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : s.per_threshold) {
    rows.push_back({{"iou_thr", t.iou_thr}, {"ap", t.ap}, {"aos", t.aos}, {"tp", t.tp}, {"fp", t.fp}, {"fn", t.fn}});
  }
  j["thresholds"] = rows;
  return j.dump(2) + "\n";
}

std::string summary_table(const EvalSummary& s) {
  std::string out = fmt::format("iou_kind {}   gts {}   dets {}\n", to_string(s.kind), s.num_gt, s.num_det);
  out += fmt::format("{:>8} {:>10} {:>10} {:>6} {:>6} {:>6}\n", "iou_thr", "AP40", "AOS40", "TP", "FP", "FN");
  for (const auto& t : s.per_threshold) {
    out += fmt::format("{:>8.2f} {:>10.6f} {:>10.6f} {:>6} {:>6} {:>6}\n", t.iou_thr, t.ap, t.aos, t.tp, t.fp, t.fn);
  }
  out += s.pearson_r ? fmt::format("confidence-IoU pearson r {:.6g}\n", *s.pearson_r)
                     : std::string("confidence-IoU pearson r undefined (fewer than two matches or zero variance)\n");
  return out;
}

}  // namespace h3d
