#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "h3d/geometry.hpp"

namespace h3d {

enum class IouKind { Bev, Iou3d };

const char* to_string(IouKind k);
IouKind parse_iou_kind(const std::string& s);
double box_iou(const Box3D& a, const Box3D& b, IouKind kind);

struct Detection {
  Box3D box;
  double score = 0.0;
};

struct FrameResult {
  std::vector<Box3D> gts;
  std::vector<Detection> dets;
};

/// Thrown when a metric is undefined for its input (e.g. no ground truths).
struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Greedy NMS: descending score with ties in input order; a candidate is
/// dropped when its IoU with any kept box exceeds iou_thr.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thr, IouKind kind);

struct DetMatch {
  bool tp = false;
  int gt = -1;
  double iou = 0.0;
  double dyaw = 0.0;  // wrapped yaw difference to the matched gt
};

struct FrameMatch {
  std::vector<DetMatch> dets;  // indexed like frame.dets
  std::vector<bool> gt_matched;
};

/// Each detection, in descending score order, claims its best-IoU unmatched
/// gt when that IoU reaches iou_thr.
FrameMatch match_frame(const FrameResult& frame, double iou_thr, IouKind kind);

/// Interpolated AP over the 40 recall positions 1/40 .. 40/40, with all
/// frames pooled into one score-sorted sweep. Throws EvalError without gts.
double ap40(const std::vector<FrameResult>& frames, double iou_thr, IouKind kind);

/// As ap40 with each true positive weighted by (1 + cos dyaw) / 2.
double aos40(const std::vector<FrameResult>& frames, double iou_thr, IouKind kind);

/// IoU threshold used to pair detections with gts for the correlation metric.
inline constexpr double kCorrelationMatchIou = 0.1;

/// Pearson r between score and IoU over all matched detections. Empty when
/// fewer than two matches exist or either side has zero variance.
std::optional<double> confidence_iou_correlation(const std::vector<FrameResult>& frames, IouKind kind,
                                                 double match_iou = kCorrelationMatchIou);

/// Plain Pearson correlation; empty on fewer than two points or zero variance.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

struct ThresholdMetrics {
  double iou_thr = 0.0;
  double ap = 0.0;
  double aos = 0.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct EvalSummary {
  IouKind kind = IouKind::Bev;
  std::vector<ThresholdMetrics> per_threshold;
  std::optional<double> pearson_r;
  int num_gt = 0;
  int num_det = 0;

  const ThresholdMetrics& at(double iou_thr) const;
};

EvalSummary evaluate(const std::vector<FrameResult>& frames, const std::vector<double>& thresholds, IouKind kind);

std::string summary_json(const EvalSummary& s);
std::string summary_table(const EvalSummary& s);

}  // namespace h3d
