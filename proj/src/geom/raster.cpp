#include "sidefield/geom/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"

namespace sidefield::geom {

int RasterBuffer::covered_pixels() const {
  return static_cast<int>(std::count_if(face.begin(), face.end(), [](int f) { return f >= 0; }));
}

namespace {

struct ScreenTriangle {
  Vec3 p[3];  // screen x, screen y (in pixel units), view depth
  double inv_area = 0.0;
  int y0 = 0, y1 = -1, x0 = 0, x1 = -1;
};

}  // namespace

RasterBuffer rasterize(const std::vector<Vec3>& vertices, const std::vector<Face>& faces,
                       const Camera& camera) {
  camera.validate();
  const int res = camera.resolution;
  RasterBuffer buf;
  buf.width = res;
  buf.height = res;
  buf.face.assign(static_cast<std::size_t>(res) * res, -1);
  buf.bary.assign(buf.face.size(), Vec3::Zero());
  buf.depth.assign(buf.face.size(), -std::numeric_limits<double>::infinity());

  const Mat3 rot = camera.rotation();
  std::vector<Vec3> screen(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec3 q = rot * vertices[i];
    const double x = camera.scale * q.x() + camera.tx;
    const double y = camera.scale * q.y() + camera.ty;
    // Pixel units: pixel (px, py) has its center at (px + 0.5, py + 0.5).
    screen[i] = Vec3(0.5 * (x + 1.0) * res, 0.5 * (1.0 - y) * res, q.z());
  }

  std::vector<ScreenTriangle> tris(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    ScreenTriangle& t = tris[f];
    for (int k = 0; k < 3; ++k) t.p[k] = screen[faces[f][k]];
    const double area = (t.p[1].x() - t.p[0].x()) * (t.p[2].y() - t.p[0].y()) -
                        (t.p[2].x() - t.p[0].x()) * (t.p[1].y() - t.p[0].y());
    if (std::abs(area) < 1e-14) continue;
    t.inv_area = 1.0 / area;
    const double xmin = std::min({t.p[0].x(), t.p[1].x(), t.p[2].x()});
    const double xmax = std::max({t.p[0].x(), t.p[1].x(), t.p[2].x()});
    const double ymin = std::min({t.p[0].y(), t.p[1].y(), t.p[2].y()});
    const double ymax = std::max({t.p[0].y(), t.p[1].y(), t.p[2].y()});
    t.x0 = std::max(0, static_cast<int>(std::floor(xmin - 0.5)));
    t.x1 = std::min(res - 1, static_cast<int>(std::ceil(xmax - 0.5)));
    t.y0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
    t.y1 = std::min(res - 1, static_cast<int>(std::ceil(ymax - 0.5)));
  }

  constexpr double kCoverTol = -1e-12;
  parallel::for_each_index(res, [&](std::int64_t row) {
    const int y = static_cast<int>(row);
    const double py = y + 0.5;
    for (std::size_t f = 0; f < tris.size(); ++f) {
      const ScreenTriangle& t = tris[f];
      if (t.inv_area == 0.0 || y < t.y0 || y > t.y1) continue;
      for (int x = t.x0; x <= t.x1; ++x) {
        const double px = x + 0.5;
        const double w0 = ((t.p[1].x() - px) * (t.p[2].y() - py) - (t.p[2].x() - px) * (t.p[1].y() - py)) * t.inv_area;
        const double w1 = ((t.p[2].x() - px) * (t.p[0].y() - py) - (t.p[0].x() - px) * (t.p[2].y() - py)) * t.inv_area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < kCoverTol || w1 < kCoverTol || w2 < kCoverTol) continue;
        const double z = w0 * t.p[0].z() + w1 * t.p[1].z() + w2 * t.p[2].z();
        const std::size_t idx = buf.index(x, y);
        const int face = static_cast<int>(f);
        if (z > buf.depth[idx] || (z == buf.depth[idx] && face < buf.face[idx])) {
          buf.depth[idx] = z;
          buf.face[idx] = face;
          buf.bary[idx] = Vec3(w0, w1, w2);
        }
      }
    }
  });
  return buf;
}

}  // namespace sidefield::geom
