#pragma once

#include <array>
#include <optional>

#include "sentinel/core.hpp"

namespace sentinel {

struct OrientedRect {
  Vec2 center{};
  double yaw = 0.0;
  double length = 0.0;  // along heading
  double width = 0.0;

  std::array<Vec2, 4> corners() const;
  bool contains(Vec2 p) const;
  /// Point expressed in the rectangle's own axes.
  Vec2 to_local(Vec2 p) const;
};

/// Separating-axis penetration depth of two oriented rectangles: the smallest
/// overlap over the four candidate axes. nullopt when separated or touching.
std::optional<double> penetration_depth(const OrientedRect& a, const OrientedRect& b);

/// True when the closed segment [a, b] touches the rectangle.
bool segment_intersects_rect(Vec2 a, Vec2 b, const OrientedRect& rect);

/// IoU of two footprints after aligning centers and headings.
double aligned_iou(Footprint a, Footprint b);

}  // namespace sentinel
