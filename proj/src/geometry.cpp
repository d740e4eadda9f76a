#include "h3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace h3d {

namespace {

// Points closer than this to a clip edge count as lying on it.
constexpr double kClipTolerance = 1e-9;
constexpr int kMaxPolygon = 16;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

struct Polygon {
  std::array<Point2, kMaxPolygon> pts{};
  int n = 0;
  void push(const Point2& p) {
    if (n < kMaxPolygon) pts[n++] = p;
  }
};

// Clips `subject` against the half-plane left of the directed edge c1->c2.
Polygon clip_edge(const Polygon& subject, const Point2& c1, const Point2& c2) {
  Polygon out;
  if (subject.n == 0) return out;
  const double len = std::hypot(c2[0] - c1[0], c2[1] - c1[1]);
  if (len == 0.0) return subject;
  auto dist = [&](const Point2& p) { return cross(c1, c2, p) / len; };

  Point2 prev = subject.pts[subject.n - 1];
  double d_prev = dist(prev);
  for (int i = 0; i < subject.n; ++i) {
    const Point2& cur = subject.pts[i];
    const double d_cur = dist(cur);
    const bool cur_in = d_cur >= -kClipTolerance;
    const bool prev_in = d_prev >= -kClipTolerance;
    if (cur_in != prev_in) {
      const double t = d_prev / (d_prev - d_cur);
      out.push({prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])});
    }
    if (cur_in) out.push(cur);
    prev = cur;
    d_prev = d_cur;
  }
  return out;
}

Quad counterclockwise(const Quad& q) {
  if (polygon_area(q.data(), 4) >= 0.0) return q;
  return {q[3], q[2], q[1], q[0]};
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw std::domain_error(std::string("non-finite box field: ") + name);
}

}  // namespace

Box3D Box3D::make(double x, double y, double z, double l, double w, double h, double yaw) {
  require_finite(x, "x");
  require_finite(y, "y");
  require_finite(z, "z");
  require_finite(l, "l");
  require_finite(w, "w");
  require_finite(h, "h");
  require_finite(yaw, "yaw");
  if (!(l > 0.0 && w > 0.0 && h > 0.0)) throw std::domain_error("box dimensions must be positive");
  return Box3D{x, y, z, l, w, h, wrap_angle(yaw)};
}

double& BoxDelta::operator[](int k) {
  switch (k) {
    case 0: return dx;
    case 1: return dy;
    case 2: return dz;
    case 3: return dw;
    case 4: return dl;
    case 5: return dh;
    case 6: return dtheta;
  }
  throw std::out_of_range("BoxDelta index");
}

double BoxDelta::operator[](int k) const { return const_cast<BoxDelta&>(*this)[k]; }

double wrap_angle(double a) {
  if (!std::isfinite(a)) throw std::domain_error("wrap_angle: non-finite angle");
  constexpr double two_pi = 2.0 * kPi;
  double r = std::fmod(a + kPi, two_pi);
  if (r < 0.0) r += two_pi;
  r -= kPi;
  if (r >= kPi) r -= two_pi;
  if (r < -kPi) r = -kPi;
  return r;
}

BoxDelta encode_box(const Box3D& gt, const Box3D& anchor, EncodingMode mode) {
  const double diag = std::hypot(anchor.w, anchor.l);
  BoxDelta d;
  d.dx = (gt.x - anchor.x) / diag;
  d.dy = (gt.y - anchor.y) / diag;
  d.dz = (gt.z - anchor.z) / anchor.h;
  d.dw = mode == EncodingMode::StandardLog ? std::log(gt.w / anchor.w) : gt.w / anchor.w;
  d.dl = std::log(gt.l / anchor.l);
  d.dh = std::log(gt.h / anchor.h);
  d.dtheta = std::sin(gt.yaw - anchor.yaw);
  return d;
}

Box3D decode_box(const BoxDelta& delta, const Box3D& anchor, EncodingMode mode) {
  if (mode == EncodingMode::AsPrinted && !(delta.dw > 0.0))
    throw std::domain_error("decode_box: width ratio must be positive in as-printed mode");
  const double diag = std::hypot(anchor.w, anchor.l);
  const double w = mode == EncodingMode::StandardLog ? anchor.w * std::exp(delta.dw) : anchor.w * delta.dw;
  const double s = std::clamp(delta.dtheta, -1.0, 1.0);
  return Box3D::make(anchor.x + delta.dx * diag, anchor.y + delta.dy * diag, anchor.z + delta.dz * anchor.h,
                     anchor.l * std::exp(delta.dl), w, anchor.h * std::exp(delta.dh), anchor.yaw + std::asin(s));
}

Quad bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  const std::array<Point2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  Quad q;
  for (int i = 0; i < 4; ++i) {
    q[i] = {box.x + c * local[i][0] - s * local[i][1], box.y + s * local[i][0] + c * local[i][1]};
  }
  return q;
}

bool point_in_footprint(const Box3D& box, double px, double py) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = px - box.x;
  const double dy = py - box.y;
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * box.l && std::abs(v) <= 0.5 * box.w;
}

double polygon_area(const Point2* pts, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Point2& a = pts[i];
    const Point2& b = pts[(i + 1) % n];
    acc += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * acc;
}

double quad_intersection_area(const Quad& a, const Quad& b) {
  const Quad qa = counterclockwise(a);
  const Quad qb = counterclockwise(b);
  if (polygon_area(qa.data(), 4) <= 0.0 || polygon_area(qb.data(), 4) <= 0.0) return 0.0;

  Polygon poly;
  for (const auto& p : qa) poly.push(p);
  for (int i = 0; i < 4 && poly.n > 0; ++i) poly = clip_edge(poly, qb[i], qb[(i + 1) % 4]);
  if (poly.n < 3) return 0.0;
  return std::max(0.0, polygon_area(poly.pts.data(), poly.n));
}

namespace {

struct BevOverlap {
  double inter = 0.0;
  double area_a = 0.0;
  double area_b = 0.0;
};

// Footprint areas come from the same corner polygons that are clipped, so an
// unclipped polygon reproduces its own area bit-for-bit.
BevOverlap bev_overlap(const Box3D& a, const Box3D& b) {
  const Quad ca = bev_corners(a);
  const Quad cb = bev_corners(b);
  BevOverlap o;
  o.area_a = polygon_area(ca.data(), 4);
  o.area_b = polygon_area(cb.data(), 4);
  const double reach = 0.5 * (std::hypot(a.l, a.w) + std::hypot(b.l, b.w));
  if (std::hypot(a.x - b.x, a.y - b.y) <= reach) o.inter = quad_intersection_area(ca, cb);
  return o;
}

}  // namespace

double bev_iou(const Box3D& a, const Box3D& b) {
  const BevOverlap o = bev_overlap(a, b);
  if (o.inter <= 0.0) return 0.0;
  return std::clamp(o.inter / (o.area_a + o.area_b - o.inter), 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double z_lo = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
  const double z_hi = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  const double dz = z_hi - z_lo;
  if (dz <= 0.0) return 0.0;
  const BevOverlap o = bev_overlap(a, b);
  if (o.inter <= 0.0) return 0.0;
  const double inter = o.inter * dz;
  return std::clamp(inter / (o.area_a * a.h + o.area_b * b.h - inter), 0.0, 1.0);
}

}  // namespace h3d
