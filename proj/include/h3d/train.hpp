#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "h3d/eval.hpp"
#include "h3d/losses.hpp"
#include "h3d/model.hpp"
#include "h3d/scene.hpp"

namespace h3d {

struct TrainConfig {
  LossKind loss_kind = LossKind::Harmonic;
  LossConfig loss{};
  int epochs = 60;
  double lr = 0.02;
  double momentum = 0.9;
  int batch_size = 4;  // scenes per step
  int train_scenes = 96;
  int val_scenes = 64;
  double pos_iou = 0.6;
  double neg_iou = 0.45;
  int hidden = 32;
  std::uint64_t seed = 0;

  // Validation / prediction.
  double score_thr = 0.05;
  double nms_iou = 0.2;

  /// Throws std::invalid_argument.
  void validate() const;
};

enum class AnchorLabel { Negative, Ignored, Positive };

struct AnchorTarget {
  AnchorLabel label = AnchorLabel::Negative;
  int gt = -1;  // set for positives
  double iou = 0.0;
};

/// Positive iff BEV IoU >= pos_iou with some gt (highest IoU wins, then the
/// lowest gt index); negative iff max IoU < neg_iou; ignored otherwise. The
/// best anchor of every gt is then forced positive for that gt.
std::vector<AnchorTarget> assign_targets(const Scene& scene, double pos_iou, double neg_iou);

struct TrainScene {
  Scene scene;
  std::vector<AnchorTarget> targets;
};

struct BatchStats {
  double loss = 0.0;  // normalized by max(1, positives)
  double l_cls = 0.0;  // sums over positives
  double l_reg = 0.0;
  double l_dir = 0.0;
  double l_neg = 0.0;  // sum over negatives
  int positives = 0;
  int negatives = 0;
};

/// Loss of a batch of scenes. With `grad` set, dL/dparams is accumulated into
/// it (it must have the model's shape and is not cleared).
BatchStats batch_loss(const ToyModel& m, const std::vector<const TrainScene*>& batch, const TrainConfig& cfg,
                      ToyModel* grad = nullptr);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean per-positive loss over the epoch
  double l_cls = 0.0;
  double l_reg = 0.0;
  double l_dir = 0.0;
  double l_neg = 0.0;
  double val_ap_07 = 0.0;
  double val_ap_05 = 0.0;
  double val_aos_07 = 0.0;
  std::optional<double> val_pearson_r;
};

struct TrainResult {
  ToyModel model;
  std::vector<EpochRecord> history;
};

struct TrainDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scene indices: training uses 0..train_scenes-1, validation the block
/// starting at kValidationOffset.
inline constexpr std::uint64_t kValidationOffset = 1'000'000;

TrainScene make_train_scene(const SceneSpec& spec, std::uint64_t index, const TrainConfig& cfg);

/// SGD with momentum; deterministic in (cfg, spec). Throws TrainDivergence.
TrainResult train(const TrainConfig& cfg, const SceneSpec& spec);

/// Decodes every anchor whose score reaches score_thr, resolves the yaw with
/// the direction head and applies BEV NMS.
std::vector<Detection> predict(const ToyModel& m, const Scene& scene, double score_thr, double nms_iou);

/// Validation metrics over the given scenes at BEV IoU 0.7 / 0.5.
EvalSummary validate_model(const ToyModel& m, const std::vector<Scene>& scenes, const TrainConfig& cfg);

std::string history_json(const TrainConfig& cfg, const std::vector<EpochRecord>& history);

struct BenchRow {
  std::uint64_t seed = 0;
  LossKind kind = LossKind::Baseline;
  double ap_07 = 0.0;
  double ap_05 = 0.0;
  double aos_07 = 0.0;
  std::optional<double> pearson_r;
};

/// For each seed s the scene seed and the train seed are both set to s, and
/// both loss kinds are trained from the same initialization.
std::vector<BenchRow> run_benchmark(const TrainConfig& cfg, const SceneSpec& spec, const std::vector<std::uint64_t>& seeds);

std::string bench_csv(const std::vector<BenchRow>& rows);

struct BenchVerdict {
  std::optional<double> median_r_baseline;
  std::optional<double> median_r_harmonic;
  double median_ap07_baseline = 0.0;
  double median_ap07_harmonic = 0.0;
  bool consistency_ok = false;  // harmonic median r >= baseline median r
  bool accuracy_ok = false;     // harmonic median AP@0.7 >= baseline - 0.02
};

BenchVerdict bench_verdict(const std::vector<BenchRow>& rows);

double median(std::vector<double> v);

}  // namespace h3d
