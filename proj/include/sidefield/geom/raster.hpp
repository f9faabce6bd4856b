#pragma once

#include <vector>

#include "sidefield/core/types.hpp"
#include "sidefield/geom/camera.hpp"

namespace sidefield::geom {

/// Per-pixel visibility from a depth-tested rasterization. Pixel (x, y) is
/// sampled at its center; face is -1 for background.
struct RasterBuffer {
  int width = 0;
  int height = 0;
  std::vector<int> face;
  std::vector<Vec3> bary;
  std::vector<double> depth;

  int covered_pixels() const;
  bool empty() const { return covered_pixels() == 0; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

/// Depth test keeps the largest view-space z; equal depths resolve to the
/// lower face index, so the result does not depend on traversal order.
RasterBuffer rasterize(const std::vector<Vec3>& vertices, const std::vector<Face>& faces,
                       const Camera& camera);

}  // namespace sidefield::geom
