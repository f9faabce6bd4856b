#pragma once

#include <vector>

#include "sidefield/core/image.hpp"
#include "sidefield/geom/camera.hpp"
#include "sidefield/geom/mesh.hpp"

namespace sidefield::geom {

/// Barycentric interpolation of per-vertex colors; background is black and
/// mask (if given) marks covered pixels.
Image render_vertex_colors(const TriMesh& mesh, const Camera& camera, std::vector<char>* mask = nullptr);

}  // namespace sidefield::geom
