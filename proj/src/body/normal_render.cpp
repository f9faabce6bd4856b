#include "sidefield/body/normal_render.hpp"

#include "sidefield/geom/raster.hpp"

namespace sidefield::body {

NormalImage render_normal_map(const geom::TriMesh& mesh, const geom::Camera& camera) {
  geom::validate(mesh);
  const geom::RasterBuffer buf = geom::rasterize(mesh.vertices, mesh.faces, camera);
  const std::vector<Vec3> normals = geom::vertex_normals(mesh);
  const Mat3 rot = camera.rotation();
  NormalImage out;
  out.pixels = Image(buf.height, buf.width, 3);
  out.mask.assign(buf.face.size(), 0);
  for (int y = 0; y < buf.height; ++y) {
    for (int x = 0; x < buf.width; ++x) {
      const std::size_t idx = buf.index(x, y);
      const int f = buf.face[idx];
      if (f < 0) continue;
      const auto& t = mesh.faces[f];
      const Vec3& b = buf.bary[idx];
      Vec3 n = b[0] * normals[t[0]] + b[1] * normals[t[1]] + b[2] * normals[t[2]];
      if (n.squaredNorm() == 0.0) n = geom::face_normal_unnormalized(mesh, f);
      n = (rot * n).normalized();
      for (int k = 0; k < 3; ++k) out.pixels.at(y, x, k) = 0.5 * n[k] + 0.5;
      out.mask[idx] = 1;
      out.empty = false;
    }
  }
  return out;
}

}  // namespace sidefield::body
