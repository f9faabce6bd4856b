#pragma once

#include <array>
#include <vector>

#include "sidefield/core/types.hpp"

namespace sidefield::geom {

/// Weak-perspective camera orbiting the vertical (y) axis.
///
/// A world point p is rotated into view space by R_y(yaw), then
///   X = scale * x' + tx,  Y = scale * y' + ty
/// with X, Y in [-1, 1] spanning the square image. The camera looks down -z;
/// larger view-space z' is closer. Unit-square coordinates are
///   u = (X + 1) / 2 (left to right),  v = (1 - Y) / 2 (top to bottom).
struct Camera {
  double yaw_deg = 0.0;
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
  int resolution = 64;

  /// Throws ContractViolation unless scale > 0 and resolution > 0.
  void validate() const;

  Mat3 rotation() const;
  Vec3 to_view(const Vec3& p) const { return rotation() * p; }
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool out_of_frame = false;  // u or v was clamped into [0,1]
};

Projection project(const Vec3& point, const Camera& camera);

/// Front, left, back and right cameras (yaw 0, 90, 180, 270).
std::array<Camera, 4> canonical_cameras(int resolution, double scale = 1.0);

/// Yaws start, start+step, ... strictly below end (half-open sweep).
std::vector<Camera> yaw_sweep(double start_deg, double end_deg, double step_deg, int resolution,
                              double scale = 1.0);

/// Rotation about +y by the given angle, matching Camera::rotation.
Mat3 yaw_rotation(double yaw_deg);

}  // namespace sidefield::geom
