#include "sidefield/geom/triangle.hpp"

#include <algorithm>
#include <cmath>

namespace sidefield::geom {

ClosestPoint closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  ClosestPoint cp;
  cp.point = a + t * ab;
  cp.bary = Vec3(1.0 - t, t, 0.0);
  cp.distance_sq = (p - cp.point).squaredNorm();
  return cp;
}

namespace {

ClosestPoint make(const Vec3& p, const Vec3& point, double u, double v, double w) {
  ClosestPoint cp;
  cp.point = point;
  cp.bary = Vec3(u, v, w);
  cp.distance_sq = (p - point).squaredNorm();
  return cp;
}

ClosestPoint degenerate_fallback(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  ClosestPoint best = closest_point_on_segment(p, a, b);
  ClosestPoint bc = closest_point_on_segment(p, b, c);
  if (bc.distance_sq < best.distance_sq)
    best = make(p, bc.point, 0.0, bc.bary[0], bc.bary[1]);
  ClosestPoint ca = closest_point_on_segment(p, c, a);
  if (ca.distance_sq < best.distance_sq)
    best = make(p, ca.point, ca.bary[1], 0.0, ca.bary[0]);
  return best;
}

}  // namespace

ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return make(p, a, 1.0, 0.0, 0.0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return make(p, b, 0.0, 1.0, 0.0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double t = d1 / (d1 - d3);
    return make(p, a + t * ab, 1.0 - t, t, 0.0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return make(p, c, 0.0, 0.0, 1.0);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double t = d2 / (d2 - d6);
    return make(p, a + t * ac, 1.0 - t, 0.0, t);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return make(p, b + t * (c - b), 0.0, 1.0 - t, t);
  }

  const double sum = va + vb + vc;
  if (!(sum > 0.0) || !std::isfinite(sum)) return degenerate_fallback(p, a, b, c);
  double v = vb / sum;
  double w = vc / sum;
  double u = 1.0 - v - w;
  // Rounding can push a coordinate a hair below zero.
  u = std::max(u, 0.0);
  v = std::max(v, 0.0);
  w = std::max(w, 0.0);
  const double s = u + v + w;
  u /= s;
  v /= s;
  w /= s;
  return make(p, u * a + v * b + w * c, u, v, w);
}

RayTriangleHit intersect_ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                      const Vec3& b, const Vec3& c) {
  constexpr double kEdgeTol = 1e-9;
  RayTriangleHit hit;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  const double scale = e1.norm() * e2.norm() * dir.norm();
  if (std::abs(det) <= 1e-14 * scale) {
    // Ray parallel to the plane. It only matters if it lies in the plane.
    const Vec3 n = e1.cross(e2);
    const double nn = n.norm();
    if (nn > 0.0 && std::abs((origin - a).dot(n)) / nn < 1e-12) hit.grazing = true;
    return hit;
  }
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < -kEdgeTol || u > 1.0 + kEdgeTol) return hit;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < -kEdgeTol || u + v > 1.0 + kEdgeTol) return hit;
  const double t = e2.dot(qvec) * inv;
  if (t <= 0.0) return hit;
  hit.hit = true;
  hit.t = t;
  hit.grazing = u < kEdgeTol || v < kEdgeTol || u + v > 1.0 - kEdgeTol;
  return hit;
}

}  // namespace sidefield::geom
