#include "sentinel/geometry.hpp"

#include <algorithm>
#include <limits>

namespace sentinel {

std::array<Vec2, 4> OrientedRect::corners() const {
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  const std::array<Vec2, 4> local = {Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw}, Vec2{hl, -hw}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = rotate(local[i], yaw) + center;
  return out;
}

Vec2 OrientedRect::to_local(Vec2 p) const { return rotate(p - center, -yaw); }

bool OrientedRect::contains(Vec2 p) const {
  const Vec2 q = to_local(p);
  return std::abs(q.x) <= 0.5 * length && std::abs(q.y) <= 0.5 * width;
}

namespace {

struct Interval {
  double lo;
  double hi;
};

Interval project(const std::array<Vec2, 4>& pts, Vec2 axis) {
  Interval iv{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Vec2& p : pts) {
    const double d = p.dot(axis);
    iv.lo = std::min(iv.lo, d);
    iv.hi = std::max(iv.hi, d);
  }
  return iv;
}

}  // namespace

std::optional<double> penetration_depth(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes = {Vec2{std::cos(a.yaw), std::sin(a.yaw)},
                                    Vec2{-std::sin(a.yaw), std::cos(a.yaw)},
                                    Vec2{std::cos(b.yaw), std::sin(b.yaw)},
                                    Vec2{-std::sin(b.yaw), std::cos(b.yaw)}};
  double depth = std::numeric_limits<double>::infinity();
  for (const Vec2& axis : axes) {
    const Interval pa = project(ca, axis);
    const Interval pb = project(cb, axis);
    const double overlap = std::min(pa.hi, pb.hi) - std::max(pa.lo, pb.lo);
    if (overlap <= 0.0) return std::nullopt;
    depth = std::min(depth, overlap);
  }
  return depth;
}

bool segment_intersects_rect(Vec2 a, Vec2 b, const OrientedRect& rect) {
  // Liang-Barsky clipping in the rectangle frame.
  const Vec2 p = rect.to_local(a);
  const Vec2 d = rect.to_local(b) - p;
  const double hl = 0.5 * rect.length;
  const double hw = 0.5 * rect.width;
  double t0 = 0.0;
  double t1 = 1.0;
  const std::array<double, 4> dir = {-d.x, d.x, -d.y, d.y};
  const std::array<double, 4> dist = {p.x + hl, hl - p.x, p.y + hw, hw - p.y};
  for (std::size_t i = 0; i < 4; ++i) {
    if (dir[i] == 0.0) {
      if (dist[i] < 0.0) return false;
      continue;
    }
    const double t = dist[i] / dir[i];
    if (dir[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  return true;
}

double aligned_iou(Footprint a, Footprint b) {
  const double inter = std::min(a.length, b.length) * std::min(a.width, b.width);
  const double uni = a.length * a.width + b.length * b.width - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

}  // namespace sentinel
