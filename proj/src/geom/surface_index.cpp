#include "sidefield/geom/surface_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"
#include "sidefield/geom/triangle.hpp"

namespace sidefield::geom {

namespace {

constexpr int kLeafSize = 4;

double box_distance_sq(const Eigen::AlignedBox3d& box, const Vec3& p) {
  return box.squaredExteriorDistance(p);
}

bool ray_hits_box(const Eigen::AlignedBox3d& box, const Vec3& o, const Vec3& inv_dir) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    double t0 = (box.min()[a] - o[a]) * inv_dir[a];
    double t1 = (box.max()[a] - o[a]) * inv_dir[a];
    if (t0 > t1) std::swap(t0, t1);
    // NaN from 0 * inf means the ray runs inside the slab plane; keep it.
    if (!std::isnan(t0)) tmin = std::max(tmin, t0);
    if (!std::isnan(t1)) tmax = std::min(tmax, t1);
  }
  return tmin <= tmax * (1.0 + 1e-12) + 1e-12;
}

// Fixed fallback directions used when the +x ray grazes an edge.
const Vec3 kRayDirections[] = {
    Vec3(1.0, 0.0, 0.0),
    Vec3(1.0, 0.0137, 0.0071).normalized(),
    Vec3(1.0, -0.0219, 0.0313).normalized(),
    Vec3(1.0, 0.0411, -0.0277).normalized(),
    Vec3(0.0, 1.0, 0.0),
    Vec3(0.0, 0.0, 1.0),
    Vec3(0.577, 0.613, -0.539).normalized(),
    Vec3(-0.31, 0.83, 0.47).normalized(),
};

}  // namespace

SurfaceIndex::SurfaceIndex(const TriMesh& mesh) : vertices_(mesh.vertices), faces_(mesh.faces) {
  validate(mesh);
  if (faces_.empty()) throw ContractViolation("SurfaceIndex requires a non-empty mesh");
  std::vector<Vec3> centroids(faces_.size());
  order_.resize(faces_.size());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    order_[f] = static_cast<int>(f);
    centroids[f] = (vertices_[faces_[f][0]] + vertices_[faces_[f][1]] + vertices_[faces_[f][2]]) / 3.0;
  }
  nodes_.reserve(2 * faces_.size() / kLeafSize + 2);
  build(0, static_cast<int>(faces_.size()), centroids);
}

int SurfaceIndex::build(int begin, int end, std::vector<Vec3>& centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d cbox;
  int min_face = std::numeric_limits<int>::max();
  for (int i = begin; i < end; ++i) {
    const int f = order_[i];
    for (int k = 0; k < 3; ++k) box.extend(vertices_[faces_[f][k]]);
    cbox.extend(centroids[f]);
    min_face = std::min(min_face, f);
  }
  nodes_[id].box = box;
  nodes_[id].min_face = min_face;
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  cbox.sizes().maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (centroids[a][axis] != centroids[b][axis])
                       return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double SurfaceIndex::min_distance(const Vec3& p) const {
  double best_sq = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_distance_sq(node.box, p) > best_sq) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const auto& t = faces_[order_[i]];
        const double d = closest_point_on_triangle(p, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]).distance_sq;
        best_sq = std::min(best_sq, d);
      }
      continue;
    }
    // Visit the nearer child first.
    const double dl = box_distance_sq(nodes_[node.left].box, p);
    const double dr = box_distance_sq(nodes_[node.right].box, p);
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return std::sqrt(best_sq);
}

int SurfaceIndex::lowest_face_within(const Vec3& p, double threshold) const {
  int best = std::numeric_limits<int>::max();
  const double threshold_sq = threshold * threshold;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.min_face >= best || box_distance_sq(node.box, p) > threshold_sq) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int f = order_[i];
        if (f >= best) continue;
        const auto& t = faces_[f];
        const double d = std::sqrt(
            closest_point_on_triangle(p, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]).distance_sq);
        if (d <= threshold) best = f;
      }
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.left;
  }
  return best;
}

NearestFaceResult SurfaceIndex::nearest(const Vec3& p) const {
  if (!p.allFinite()) throw ContractViolation("nearest_face: non-finite query point");
  const double d_min = min_distance(p);
  const int face = lowest_face_within(p, d_min + kNearestTieTolerance);
  const auto& t = faces_[face];
  const ClosestPoint cp = closest_point_on_triangle(p, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
  NearestFaceResult r;
  r.face = face;
  r.bary = cp.bary;
  r.closest = cp.point;
  r.distance = std::sqrt(cp.distance_sq);
  r.inside = r.distance <= kSurfaceEpsilon || inside(p);
  return r;
}

int SurfaceIndex::count_crossings(const Vec3& p, const Vec3& dir, bool& grazing) const {
  const Vec3 inv_dir = dir.cwiseInverse();
  int crossings = 0;
  grazing = false;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!ray_hits_box(node.box, p, inv_dir)) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const auto& t = faces_[order_[i]];
        const RayTriangleHit hit = intersect_ray_triangle(p, dir, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
        if (hit.grazing) {
          grazing = true;
          return 0;
        }
        if (hit.hit) ++crossings;
      }
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.left;
  }
  return crossings;
}

bool SurfaceIndex::inside(const Vec3& p) const {
  if (!p.allFinite()) throw ContractViolation("inside test: non-finite query point");
  if (min_distance(p) <= kSurfaceEpsilon) return true;
  for (const Vec3& dir : kRayDirections) {
    bool grazing = false;
    const int n = count_crossings(p, dir, grazing);
    if (!grazing) return (n % 2) == 1;
  }
  // Every ray grazed an edge: fall back to the side of the nearest face.
  const auto& t = faces_[lowest_face_within(p, min_distance(p) + kNearestTieTolerance)];
  const Vec3 n = (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]);
  const auto cp = closest_point_on_triangle(p, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
  return (p - cp.point).dot(n) < 0.0;
}

double SurfaceIndex::unsigned_distance(const Vec3& p) const {
  if (!p.allFinite()) throw ContractViolation("distance query: non-finite point");
  return min_distance(p);
}

double SurfaceIndex::signed_distance(const Vec3& p) const {
  if (!p.allFinite()) throw ContractViolation("signed_distance: non-finite query point");
  const double d = min_distance(p);
  if (d <= kSurfaceEpsilon) return 0.0;
  return inside(p) ? -d : d;
}

std::vector<NearestFaceResult> SurfaceIndex::nearest_batch(std::span<const Vec3> points) const {
  std::vector<NearestFaceResult> out(points.size());
  parallel::for_each_index(static_cast<std::int64_t>(points.size()),
                           [&](std::int64_t i) { out[i] = nearest(points[i]); });
  return out;
}

std::vector<double> SurfaceIndex::signed_distance_batch(std::span<const Vec3> points) const {
  std::vector<double> out(points.size());
  parallel::for_each_index(static_cast<std::int64_t>(points.size()),
                           [&](std::int64_t i) { out[i] = signed_distance(points[i]); });
  return out;
}

std::vector<double> SurfaceIndex::unsigned_distance_batch(std::span<const Vec3> points) const {
  std::vector<double> out(points.size());
  parallel::for_each_index(static_cast<std::int64_t>(points.size()),
                           [&](std::int64_t i) { out[i] = unsigned_distance(points[i]); });
  return out;
}

std::vector<char> SurfaceIndex::inside_batch(std::span<const Vec3> points) const {
  std::vector<char> out(points.size());
  parallel::for_each_index(static_cast<std::int64_t>(points.size()),
                           [&](std::int64_t i) { out[i] = inside(points[i]) ? 1 : 0; });
  return out;
}

}  // namespace sidefield::geom
