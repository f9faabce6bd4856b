#pragma once

#include "sidefield/core/types.hpp"

namespace sidefield::geom {

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  Vec3 bary = Vec3::Zero();  // (u, v, w) for corners (a, b, c)
  double distance_sq = 0.0;
};

/// Closest point on triangle abc to p, by Voronoi-region classification.
/// Degenerate triangles fall back to the closest of the three edges.
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

ClosestPoint closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);

struct RayTriangleHit {
  bool hit = false;
  bool grazing = false;  // crossing lies within tolerance of an edge, or ray is coplanar
  double t = 0.0;
};

RayTriangleHit intersect_ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                      const Vec3& b, const Vec3& c);

}  // namespace sidefield::geom
