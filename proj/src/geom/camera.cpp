#include "sidefield/geom/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sidefield/core/error.hpp"

namespace sidefield::geom {

Mat3 yaw_rotation(double yaw_deg) {
  const double a = yaw_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  Mat3 r;
  r << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return r;
}

void Camera::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ContractViolation("camera scale must be > 0");
  if (resolution <= 0) throw ContractViolation("camera resolution must be > 0");
  if (!std::isfinite(yaw_deg) || !std::isfinite(tx) || !std::isfinite(ty))
    throw ContractViolation("camera parameters must be finite");
}

Mat3 Camera::rotation() const { return yaw_rotation(yaw_deg); }

Projection project(const Vec3& point, const Camera& camera) {
  const Vec3 q = camera.to_view(point);
  const double x = camera.scale * q.x() + camera.tx;
  const double y = camera.scale * q.y() + camera.ty;
  Projection p;
  p.u = 0.5 * (x + 1.0);
  p.v = 0.5 * (1.0 - y);
  p.depth = q.z();
  p.out_of_frame = p.u < 0.0 || p.u > 1.0 || p.v < 0.0 || p.v > 1.0;
  p.u = std::clamp(p.u, 0.0, 1.0);
  p.v = std::clamp(p.v, 0.0, 1.0);
  return p;
}

std::array<Camera, 4> canonical_cameras(int resolution, double scale) {
  std::array<Camera, 4> cams;
  const double yaws[4] = {0.0, 90.0, 180.0, 270.0};
  for (int i = 0; i < 4; ++i) {
    cams[i].yaw_deg = yaws[i];
    cams[i].scale = scale;
    cams[i].resolution = resolution;
  }
  return cams;
}

std::vector<Camera> yaw_sweep(double start_deg, double end_deg, double step_deg, int resolution,
                              double scale) {
  if (!(step_deg > 0.0)) throw ContractViolation("sweep step must be > 0");
  if (!(end_deg > start_deg)) throw ContractViolation("sweep end must exceed start");
  std::vector<Camera> cams;
  const int n = static_cast<int>(std::ceil((end_deg - start_deg) / step_deg - 1e-9));
  for (int i = 0; i < n; ++i) {
    Camera c;
    c.yaw_deg = start_deg + i * step_deg;
    c.scale = scale;
    c.resolution = resolution;
    cams.push_back(c);
  }
  return cams;
}

}  // namespace sidefield::geom
