#include "h3d/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace h3d {

namespace {

void check_range(const Range& r, const char* name, bool positive) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi || (positive && r.lo <= 0.0)) {
    throw std::invalid_argument(std::string("scene spec: invalid ") + name + " range");
  }
}

double uniform(std::mt19937_64& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

constexpr int kPlacementRetries = 200;
constexpr double kMaxObjectOverlap = 0.1;
constexpr double kTargetClip = 3.0;

}  // namespace

void SceneSpec::validate() const {
  if (!(extent_x > 0.0) || !(extent_y > 0.0)) throw std::invalid_argument("scene spec: extents must be positive");
  if (!(anchor_stride > 0.0)) throw std::invalid_argument("scene spec: anchor_stride must be positive");
  if (min_objects < 0 || max_objects < min_objects) throw std::invalid_argument("scene spec: bad object count range");
  check_range(length, "length", true);
  check_range(width, "width", true);
  check_range(height, "height", true);
  check_range(yaw, "yaw", false);
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw std::invalid_argument("scene spec: noise_sigma must be >= 0");
  if (!(clutter_fraction >= 0.0 && clutter_fraction <= 1.0)) {
    throw std::invalid_argument("scene spec: clutter_fraction must lie in [0, 1]");
  }
  if (!(anchor_l > 0.0 && anchor_w > 0.0 && anchor_h > 0.0) || !std::isfinite(anchor_z)) {
    throw std::invalid_argument("scene spec: invalid anchor template");
  }
  if (extent_x < anchor_stride || extent_y < anchor_stride) throw std::invalid_argument("scene spec: field smaller than one anchor cell");
}

std::vector<Box3D> make_anchors(const SceneSpec& spec) {
  const int nx = static_cast<int>(std::floor(spec.extent_x / spec.anchor_stride));
  const int ny = static_cast<int>(std::floor(spec.extent_y / spec.anchor_stride));
  const double x0 = -0.5 * nx * spec.anchor_stride + 0.5 * spec.anchor_stride;
  const double y0 = -0.5 * ny * spec.anchor_stride + 0.5 * spec.anchor_stride;
  std::vector<Box3D> out;
  out.reserve(static_cast<std::size_t>(nx) * ny * 2);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      for (double yaw : {0.0, kPi / 2}) {
        out.push_back(Box3D::make(x0 + i * spec.anchor_stride, y0 + j * spec.anchor_stride, spec.anchor_z,
                                  spec.anchor_l, spec.anchor_w, spec.anchor_h, yaw));
      }
    }
  }
  return out;
}

Box3D fold_to_anchor(const Box3D& gt, const Box3D& anchor) {
  Box3D out = gt;
  if (std::abs(wrap_angle(gt.yaw - anchor.yaw)) > kPi / 2) out.yaw = wrap_angle(gt.yaw + kPi);
  return out;
}

bool direction_bit(double yaw) { return wrap_angle(yaw) >= 0.0; }

BoxDelta regression_target(const Box3D& gt, const Box3D& anchor) {
  return encode_box(fold_to_anchor(gt, anchor), anchor);
}

Scene gen_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scene scene;
  scene.anchors = make_anchors(spec);

  const int count = std::uniform_int_distribution<int>(spec.min_objects, spec.max_objects)(rng);
  const double margin = 0.5 * spec.length.hi;
  const Range xs{-0.5 * spec.extent_x + margin, 0.5 * spec.extent_x - margin};
  const Range ys{-0.5 * spec.extent_y + margin, 0.5 * spec.extent_y - margin};
  std::vector<double> quality;
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const double l = uniform(rng, spec.length);
      const double w = uniform(rng, spec.width);
      const double h = uniform(rng, spec.height);
      const double x = xs.lo < xs.hi ? uniform(rng, xs) : 0.0;
      const double y = ys.lo < ys.hi ? uniform(rng, ys) : 0.0;
      const double z = spec.anchor_z + 0.2 * (unit(rng) - 0.5);
      const double yaw = spec.yaw.lo < spec.yaw.hi ? uniform(rng, spec.yaw) : spec.yaw.lo;
      const Box3D box = Box3D::make(x, y, z, l, w, h, yaw);
      const bool clash = std::any_of(scene.gt_boxes.begin(), scene.gt_boxes.end(),
                                     [&](const Box3D& o) { return bev_iou(o, box) > kMaxObjectOverlap; });
      if (!clash) {
        scene.gt_boxes.push_back(box);
        quality.push_back(unit(rng));
        placed = true;
      }
    }
    if (!placed) scene.placement_truncated = true;
  }

  const std::size_t na = scene.anchors.size();
  scene.features.assign(na * kFeatureDim, 0.0);
  scene.clutter.assign(na, false);
  for (std::size_t a = 0; a < na; ++a) {
    const Box3D& anchor = scene.anchors[a];
    double* f = scene.features.data() + a * kFeatureDim;

    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < scene.gt_boxes.size(); ++g) {
      const double iou = bev_iou(anchor, scene.gt_boxes[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best < 0) {
      double best_d2 = 0.0;
      for (std::size_t g = 0; g < scene.gt_boxes.size(); ++g) {
        const double dx = scene.gt_boxes[g].x - anchor.x;
        const double dy = scene.gt_boxes[g].y - anchor.y;
        if (best < 0 || dx * dx + dy * dy < best_d2) {
          best_d2 = dx * dx + dy * dy;
          best = static_cast<int>(g);
        }
      }
    }

    if (best_iou == 0.0 && unit(rng) < spec.clutter_fraction) {
      scene.clutter[a] = true;
      for (int c = 0; c < kFeatureDim; ++c) f[c] = gauss(rng);
      f[9] = unit(rng);
      continue;
    }

    if (best < 0) {
      // Empty scene: nothing to encode against.
      for (int c = 0; c < 7; ++c) f[c] = kTargetClip + spec.noise_sigma * gauss(rng);
      f[7] = spec.noise_sigma * gauss(rng);
      f[8] = 0.5 * spec.noise_sigma * gauss(rng);
      f[9] = unit(rng);
    } else {
      const Box3D& gt = scene.gt_boxes[static_cast<std::size_t>(best)];
      const double q = quality[static_cast<std::size_t>(best)];
      const double sigma = spec.noise_sigma * (0.25 + 2.75 * (1.0 - q));
      const BoxDelta t = regression_target(gt, anchor);
      for (int c = 0; c < 7; ++c) f[c] = std::clamp(t[c], -kTargetClip, kTargetClip) + sigma * gauss(rng);
      f[7] = (direction_bit(gt.yaw) ? 1.0 : -1.0) + spec.noise_sigma * gauss(rng);
      f[8] = best_iou + 0.5 * spec.noise_sigma * gauss(rng);
      f[9] = q;
    }
    f[10] = gauss(rng);
    f[11] = gauss(rng);
  }
  return scene;
}

}  // namespace h3d
