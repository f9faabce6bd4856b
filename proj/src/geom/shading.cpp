#include "sidefield/geom/shading.hpp"

#include "sidefield/core/error.hpp"
#include "sidefield/geom/raster.hpp"

namespace sidefield::geom {

Image render_vertex_colors(const TriMesh& mesh, const Camera& camera, std::vector<char>* mask) {
  if (!mesh.has_colors()) throw ContractViolation("render_vertex_colors: mesh has no vertex colors");
  const RasterBuffer buf = rasterize(mesh.vertices, mesh.faces, camera);
  Image img(buf.height, buf.width, 3);
  if (mask) mask->assign(buf.face.size(), 0);
  for (int y = 0; y < buf.height; ++y) {
    for (int x = 0; x < buf.width; ++x) {
      const std::size_t idx = buf.index(x, y);
      const int f = buf.face[idx];
      if (f < 0) continue;
      const auto& t = mesh.faces[f];
      const Vec3& b = buf.bary[idx];
      const Vec3 c = b[0] * mesh.colors[t[0]] + b[1] * mesh.colors[t[1]] + b[2] * mesh.colors[t[2]];
      for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
      if (mask) (*mask)[idx] = 1;
    }
  }
  return img;
}

}  // namespace sidefield::geom
