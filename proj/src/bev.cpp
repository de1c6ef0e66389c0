#include "sentinel/bev.hpp"

#include <string>

namespace sentinel {

void GridSpec::validate() const {
  if (cells_x <= 0 || cells_y <= 0) throw ValidationError("grid dimensions must be positive");
  if (!(resolution > 0.0) || !std::isfinite(resolution)) throw ValidationError("grid resolution must be positive");
}

std::optional<CellIndex> try_world_to_cell(Vec2 p, const GridSpec& spec) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  const double fc = std::floor(0.5 * spec.cells_x + (p.x - spec.origin.x) / spec.resolution);
  const double fr = std::floor(0.5 * spec.cells_y + (p.y - spec.origin.y) / spec.resolution);
  if (fc < 0.0 || fr < 0.0 || fc >= spec.cells_x || fr >= spec.cells_y) return std::nullopt;
  return CellIndex{static_cast<int>(fc), static_cast<int>(fr)};
}

CellIndex world_to_cell(Vec2 p, const GridSpec& spec) {
  if (auto c = try_world_to_cell(p, spec)) return *c;
  throw OutOfGrid("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") is outside the grid");
}

Vec2 cell_center(CellIndex c, const GridSpec& spec) {
  return {spec.origin.x + (c.col + 0.5 - 0.5 * spec.cells_x) * spec.resolution,
          spec.origin.y + (c.row + 0.5 - 0.5 * spec.cells_y) * spec.resolution};
}

BevGrid::BevGrid(GridSpec spec, double fill) : spec_(spec), cells_(spec.size(), fill) { spec_.validate(); }

BevGrid resample(const BevGrid& src, const GridSpec& dst, const Rigid2& dst_to_src, double fill) {
  dst.validate();
  const GridSpec& ss = src.spec();
  if (dst == ss && dst_to_src.is_identity()) return src;
  BevGrid out(dst, fill);
  const double dcx = 0.5 * dst.cells_x;
  const double dcy = 0.5 * dst.cells_y;
  const double scx = 0.5 * ss.cells_x;
  const double scy = 0.5 * ss.cells_y;
  const double c = std::cos(dst_to_src.rotation);
  const double s = std::sin(dst_to_src.rotation);
  for (int row = 0; row < dst.cells_y; ++row) {
    for (int col = 0; col < dst.cells_x; ++col) {
      const double qx = (col - dcx) * dst.resolution;
      const double qy = (row - dcy) * dst.resolution;
      const double px = c * qx - s * qy + dst_to_src.translation.x;
      const double py = s * qx + c * qy + dst_to_src.translation.y;
      const double sc = std::round(scx + px / ss.resolution);
      const double sr = std::round(scy + py / ss.resolution);
      if (sc < 0.0 || sr < 0.0 || sc >= ss.cells_x || sr >= ss.cells_y) continue;
      out.at(col, row) = src.at(static_cast<int>(sc), static_cast<int>(sr));
    }
  }
  return out;
}

}  // namespace sentinel
