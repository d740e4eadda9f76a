#pragma once

#include <array>
#include <numbers>

namespace h3d {

inline constexpr double kPi = std::numbers::pi;

/// Oriented 3D box. (x, y) is the BEV center, z the vertical center,
/// l runs along the heading, w across it. Yaw is counterclockwise from +x.
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;

  /// Validating constructor: dims must be positive, everything finite.
  /// The stored yaw is wrapped to [-pi, pi). Throws std::domain_error.
  static Box3D make(double x, double y, double z, double l, double w, double h, double yaw);

  bool operator==(const Box3D&) const = default;
};

/// Encoded regression offsets relative to an anchor.
struct BoxDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dw = 0.0;
  double dl = 0.0;
  double dh = 0.0;
  double dtheta = 0.0;

  static constexpr int kSize = 7;

  std::array<double, kSize> to_array() const { return {dx, dy, dz, dw, dl, dh, dtheta}; }
  static BoxDelta from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }
  double& operator[](int k);
  double operator[](int k) const;

  bool operator==(const BoxDelta&) const = default;
};

/// The width channel is either log-encoded like l and h (StandardLog) or
/// a plain ratio W_gt / W (AsPrinted).
enum class EncodingMode { StandardLog, AsPrinted };

using Point2 = std::array<double, 2>;
using Quad = std::array<Point2, 4>;

/// Wraps to [-pi, pi). Throws std::domain_error on non-finite input.
double wrap_angle(double a);

BoxDelta encode_box(const Box3D& gt, const Box3D& anchor, EncodingMode mode = EncodingMode::StandardLog);

/// Inverse of encode_box on the principal arcsin branch; the pi ambiguity of
/// the sine yaw code is left to the caller. Throws std::domain_error when
/// dw <= 0 in AsPrinted mode.
Box3D decode_box(const BoxDelta& delta, const Box3D& anchor, EncodingMode mode = EncodingMode::StandardLog);

/// BEV footprint, counterclockwise from the (+l/2, +w/2) corner.
Quad bev_corners(const Box3D& box);

bool point_in_footprint(const Box3D& box, double px, double py);

/// Signed shoelace area of a simple polygon (positive when CCW).
double polygon_area(const Point2* pts, int n);

/// Area of the intersection of two convex quads. Either winding is accepted.
double quad_intersection_area(const Quad& a, const Quad& b);

double bev_iou(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

}  // namespace h3d
