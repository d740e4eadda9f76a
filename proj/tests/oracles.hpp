#pragma once

// Reference computations written independently of the library code.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "h3d/geometry.hpp"

namespace h3d::oracle {

inline bool inside(const Box3D& b, double px, double py) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double dx = px - b.x, dy = py - b.y;
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * b.l && std::abs(v) <= 0.5 * b.w;
}

// Stratified Monte-Carlo: one jittered point per cell of a side x side grid
// over the joint bounding rectangle.
inline double mc_bev_iou(const Box3D& a, const Box3D& b, int side, std::uint64_t seed) {
  auto reach = [](const Box3D& x) { return 0.5 * std::hypot(x.l, x.w); };
  const double x0 = std::min(a.x - reach(a), b.x - reach(b));
  const double x1 = std::max(a.x + reach(a), b.x + reach(b));
  const double y0 = std::min(a.y - reach(a), b.y - reach(b));
  const double y1 = std::max(a.y + reach(a), b.y + reach(b));
  const double cw = (x1 - x0) / side, ch = (y1 - y0) / side;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::int64_t na = 0, nb = 0, both = 0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const double px = x0 + (i + u(rng)) * cw;
      const double py = y0 + (j + u(rng)) * ch;
      const bool ia = inside(a, px, py), ib = inside(b, px, py);
      na += ia;
      nb += ib;
      both += ia && ib;
    }
  }
  const double uni = static_cast<double>(na + nb - both);
  return uni > 0 ? both / uni : 0.0;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Harmonic total written straight from its definition.
inline double harmonic_total(double l_cls, double l_reg, double l_dir, double beta_dir) {
  const double br = std::exp(-l_reg), bc = std::exp(-l_cls);
  return (1 + br) * l_cls + (1 + bc) * l_reg + (1 - (br + bc) / beta_dir) * l_dir;
}

}  // namespace h3d::oracle
