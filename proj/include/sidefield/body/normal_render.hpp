#pragma once

#include <vector>

#include "sidefield/core/image.hpp"
#include "sidefield/geom/camera.hpp"
#include "sidefield/geom/mesh.hpp"

namespace sidefield::body {

/// Camera-space normals encoded as 0.5 * n + 0.5. Background pixels are
/// exactly zero with mask false.
struct NormalImage {
  Image pixels;
  std::vector<char> mask;
  bool empty = true;  // nothing of the mesh landed in the frame

  int size() const { return pixels.height; }
};

/// Rasterizes smooth (interpolated vertex) normals with a depth test.
NormalImage render_normal_map(const geom::TriMesh& mesh, const geom::Camera& camera);

inline Vec3 decode_normal(const Image& img, int y, int x) {
  return Vec3(2.0 * img.at(y, x, 0) - 1.0, 2.0 * img.at(y, x, 1) - 1.0, 2.0 * img.at(y, x, 2) - 1.0);
}

}  // namespace sidefield::body
