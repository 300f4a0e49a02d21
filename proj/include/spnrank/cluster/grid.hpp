#pragma once

#include <algorithm>
#include <vector>

#include "spnrank/error.hpp"

namespace spnrank::cluster {

struct PatchGrid {
  std::size_t p = 12;
  std::size_t rows = 3;
  std::size_t cols = 4;
  double overlap_fraction = 0.25;
};

// Half-open pixel rectangle [x0, x1) × [y0, y1).
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Row-major rows × cols lattice over the image. Each cell grows by
// overlap/2 of a cell on every interior side, so neighbours share
// overlap_fraction of a cell; edges on the image border stay put.
inline std::vector<Rect> patch_grid(double width, double height, const PatchGrid& grid) {
  if (!(width > 0.0 && height > 0.0)) throw UsageError("image dimensions must be positive");
  if (grid.rows == 0 || grid.cols == 0 || grid.rows * grid.cols != grid.p) {
    throw UsageError("grid rows x cols must equal p");
  }
  if (!(grid.overlap_fraction >= 0.0 && grid.overlap_fraction < 1.0)) {
    throw UsageError("overlap_fraction must be in [0, 1)");
  }
  if (static_cast<double>(grid.cols) > width || static_cast<double>(grid.rows) > height) {
    throw UsageError("grid has more cells than the image has pixels");
  }
  const double cw = width / static_cast<double>(grid.cols);
  const double ch = height / static_cast<double>(grid.rows);
  const double gx = 0.5 * grid.overlap_fraction * cw;
  const double gy = 0.5 * grid.overlap_fraction * ch;
  std::vector<Rect> out;
  out.reserve(grid.p);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      Rect rect{static_cast<double>(c) * cw, static_cast<double>(r) * ch, static_cast<double>(c + 1) * cw,
                static_cast<double>(r + 1) * ch};
      if (c > 0) rect.x0 -= gx;
      if (c + 1 < grid.cols) rect.x1 += gx;
      if (r > 0) rect.y0 -= gy;
      if (r + 1 < grid.rows) rect.y1 += gy;
      rect.x0 = std::max(rect.x0, 0.0);
      rect.y0 = std::max(rect.y0, 0.0);
      rect.x1 = std::min(rect.x1, width);
      rect.y1 = std::min(rect.y1, height);
      out.push_back(rect);
    }
  }
  return out;
}

}  // namespace spnrank::cluster
