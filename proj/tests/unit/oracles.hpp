// Straight-line reference computations used as test oracles. Kept
// deliberately naive and independent of the library implementations.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sidefield/core/types.hpp"
#include "sidefield/geom/mesh.hpp"

namespace oracle {

using sidefield::Face;
using sidefield::Mat3;
using sidefield::Vec3;

struct Closest {
  Vec3 point;
  Vec3 bary;
  double dist;
};

inline Closest closest_on_edge(const Vec3& p, const Vec3& a, const Vec3& b, int ia, int ib) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  Closest c;
  c.point = a + t * ab;
  c.bary = Vec3::Zero();
  c.bary[ia] = 1.0 - t;
  c.bary[ib] += t;
  c.dist = (p - c.point).norm();
  return c;
}

// Plane projection when it lands inside, otherwise the best of the three edges.
inline Closest closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e0 = b - a, e1 = c - a, d = p - a;
  const double a00 = e0.dot(e0), a01 = e0.dot(e1), a11 = e1.dot(e1);
  const double det = a00 * a11 - a01 * a01;
  if (det > 1e-300) {
    const double r0 = d.dot(e0), r1 = d.dot(e1);
    const double v = (a11 * r0 - a01 * r1) / det;
    const double w = (a00 * r1 - a01 * r0) / det;
    if (v >= 0 && w >= 0 && v + w <= 1) {
      Closest out;
      out.point = a + v * e0 + w * e1;
      out.bary = Vec3(1 - v - w, v, w);
      out.dist = (p - out.point).norm();
      return out;
    }
  }
  Closest best = closest_on_edge(p, a, b, 0, 1);
  for (const Closest& cand : {closest_on_edge(p, b, c, 1, 2), closest_on_edge(p, c, a, 2, 0)})
    if (cand.dist < best.dist) best = cand;
  return best;
}

struct Nearest {
  int face = -1;
  Closest closest;
};

inline Nearest nearest_face(const sidefield::geom::TriMesh& m, const Vec3& p) {
  std::vector<Closest> all;
  double best = std::numeric_limits<double>::infinity();
  for (const Face& f : m.faces) {
    all.push_back(closest_on_triangle(p, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]));
    best = std::min(best, all.back().dist);
  }
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].dist <= best + 1e-12) return {static_cast<int>(i), all[i]};
  return {};
}

// Counts ray crossings along dir; used with several generic directions.
inline int crossings(const sidefield::geom::TriMesh& m, const Vec3& p, const Vec3& dir) {
  int count = 0;
  for (const Face& f : m.faces) {
    const Vec3 a = m.vertices[f[0]], b = m.vertices[f[1]], c = m.vertices[f[2]];
    const Vec3 n = (b - a).cross(c - a);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-15) continue;
    const double t = n.dot(a - p) / denom;
    if (t <= 0) continue;
    const Vec3 q = p + t * dir;
    const double s0 = (b - a).cross(q - a).dot(n);
    const double s1 = (c - b).cross(q - b).dot(n);
    const double s2 = (a - c).cross(q - c).dot(n);
    if ((s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0)) ++count;
  }
  return count;
}

inline bool inside(const sidefield::geom::TriMesh& m, const Vec3& p) {
  const Vec3 dirs[3] = {Vec3(0.5773, 0.3141, 0.7536).normalized(), Vec3(-0.2718, 0.8660, 0.1414).normalized(),
                        Vec3(0.1732, -0.4142, -0.9).normalized()};
  int votes = 0;
  for (const Vec3& d : dirs) votes += crossings(m, p, d) % 2;
  return votes >= 2;
}

inline double signed_distance(const sidefield::geom::TriMesh& m, const Vec3& p) {
  const double d = nearest_face(m, p).closest.dist;
  if (d <= 1e-12) return 0.0;
  return inside(m, p) ? -d : d;
}

inline Mat3 axis_angle(const Vec3& r) {
  const double t = r.norm();
  if (t == 0) return Mat3::Identity();
  const Vec3 k = r / t;
  Mat3 K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(t) * K + (1 - std::cos(t)) * K * K;
}

inline Mat3 rot_y(double deg) {
  const double r = deg * M_PI / 180.0, c = std::cos(r), s = std::sin(r);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

// Pixel-centre coordinates in the weak-perspective image plane.
inline double pixel_x(int i, int w) { return 2.0 * (i + 0.5) / w - 1.0; }
inline double pixel_y(int j, int h) { return 1.0 - 2.0 * (j + 0.5) / h; }

}  // namespace oracle
