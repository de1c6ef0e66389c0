#pragma once

#include <optional>
#include <vector>

#include "sentinel/core.hpp"

namespace sentinel {

/// Square-celled raster anchored so that `origin` falls on the corner shared
/// by cells (cells_x/2 - 1, .) and (cells_x/2, .), and likewise on y.
struct GridSpec {
  int cells_x = 100;
  int cells_y = 100;
  double resolution = 0.5;  // metres per cell
  Vec2 origin{};

  void validate() const;  // ValidationError on non-positive dimensions/resolution
  double half_extent_x() const { return 0.5 * cells_x * resolution; }
  double half_extent_y() const { return 0.5 * cells_y * resolution; }
  std::size_t size() const { return static_cast<std::size_t>(cells_x) * static_cast<std::size_t>(cells_y); }
  bool operator==(const GridSpec&) const = default;
};

struct CellIndex {
  int col = 0;
  int row = 0;
  bool operator==(const CellIndex&) const = default;
};

/// col = floor(cells_x/2 + (x - origin.x)/resolution), row likewise on y.
/// Throws OutOfGrid outside the raster.
CellIndex world_to_cell(Vec2 p, const GridSpec& spec);
std::optional<CellIndex> try_world_to_cell(Vec2 p, const GridSpec& spec);
Vec2 cell_center(CellIndex c, const GridSpec& spec);

/// Occupancy-probability raster, row-major (row = y index).
class BevGrid {
 public:
  BevGrid() = default;
  explicit BevGrid(GridSpec spec, double fill = 0.5);

  const GridSpec& spec() const { return spec_; }
  double at(int col, int row) const { return cells_[index(col, row)]; }
  double& at(int col, int row) { return cells_[index(col, row)]; }
  const std::vector<double>& cells() const { return cells_; }
  std::vector<double>& cells() { return cells_; }

  bool operator==(const BevGrid&) const = default;

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(spec_.cells_x) + static_cast<std::size_t>(col);
  }

  GridSpec spec_{};
  std::vector<double> cells_;
};

/// Nearest-neighbour resample of `src` onto `dst`. `dst_to_src` maps a point
/// of the destination frame (relative to dst.origin) into the source frame
/// (relative to src.origin). Cell indices are treated as lattice points, so a
/// destination cell takes the source cell whose lattice point is nearest to
/// its own transformed lattice point. Cells landing outside the source are
/// `fill`.
BevGrid resample(const BevGrid& src, const GridSpec& dst, const Rigid2& dst_to_src, double fill = 0.5);

}  // namespace sentinel
