#pragma once

#include <cstdint>
#include <vector>

#include "h3d/geometry.hpp"

namespace h3d {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Parameters of the synthetic BEV scene generator. The field is centered on
/// the origin; anchors sit at the centers of an anchor_stride grid with two
/// yaws (0 and pi/2) per location.
struct SceneSpec {
  double extent_x = 32.0;
  double extent_y = 32.0;
  double anchor_stride = 2.0;
  int min_objects = 3;
  int max_objects = 6;
  Range length{3.5, 4.8};
  Range width{1.6, 2.0};
  Range height{1.4, 1.8};
  Range yaw{-kPi, kPi};
  double noise_sigma = 0.03;
  double clutter_fraction = 0.05;
  std::uint64_t seed = 0;

  // Anchor template.
  double anchor_l = 3.9;
  double anchor_w = 1.6;
  double anchor_h = 1.56;
  double anchor_z = -1.0;

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Feature layout per anchor.
///   0..6   encoded offsets to the best-matching gt plus noise
///   7      direction cue (+1 / -1) plus noise
///   8      max BEV IoU with any gt plus noise
///   9      observation quality q in [0, 1]; noise on 0..6 shrinks as q grows
///   10..11 distractors
inline constexpr int kFeatureDim = 12;

struct Scene {
  std::vector<Box3D> gt_boxes;
  std::vector<Box3D> anchors;
  std::vector<double> features;  // anchors.size() x kFeatureDim, row-major
  std::vector<bool> clutter;     // per anchor
  bool placement_truncated = false;

  std::size_t num_anchors() const { return anchors.size(); }
  const double* feature_row(std::size_t a) const { return features.data() + a * kFeatureDim; }
};

/// Fixed anchor grid for a spec.
std::vector<Box3D> make_anchors(const SceneSpec& spec);

/// The yaw of `gt` shifted by pi when needed so it lies within pi/2 of the
/// anchor yaw; the sine code is unambiguous on that half-turn.
Box3D fold_to_anchor(const Box3D& gt, const Box3D& anchor);

/// Direction label of a yaw: true iff the wrapped yaw is in [0, pi).
bool direction_bit(double yaw);

/// Regression target of an anchor with respect to a gt.
BoxDelta regression_target(const Box3D& gt, const Box3D& anchor);

/// Deterministic in (spec.seed, index).
Scene gen_scene(const SceneSpec& spec, std::uint64_t index);

}  // namespace h3d
