#pragma once

#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "sidefield/core/types.hpp"
#include "sidefield/geom/mesh.hpp"

namespace sidefield::geom {

/// Nearest-face query result. bary are the barycentric coordinates of the
/// closest point within the reported face.
struct NearestFaceResult {
  int face = -1;
  Vec3 bary = Vec3::Zero();
  double distance = 0.0;
  bool inside = false;
  Vec3 closest = Vec3::Zero();
};

/// Distances within this absolute tolerance of the global minimum count as
/// ties; the lowest face index among them wins.
inline constexpr double kNearestTieTolerance = 1e-12;

/// Points closer than this to the surface count as on it (inside).
inline constexpr double kSurfaceEpsilon = 1e-12;

/// Bounding-volume hierarchy over a closed triangle mesh answering
/// nearest-face, inside/outside and signed-distance queries. Immutable after
/// construction, so concurrent queries are safe.
class SurfaceIndex {
 public:
  explicit SurfaceIndex(const TriMesh& mesh);

  NearestFaceResult nearest(const Vec3& p) const;

  /// Ray-parity along +x with deterministic perturbed fallbacks when a ray
  /// grazes an edge. Surface points are inside.
  bool inside(const Vec3& p) const;

  /// Negative inside, zero on the surface.
  double signed_distance(const Vec3& p) const;

  double unsigned_distance(const Vec3& p) const;

  std::vector<NearestFaceResult> nearest_batch(std::span<const Vec3> points) const;
  std::vector<double> signed_distance_batch(std::span<const Vec3> points) const;
  std::vector<double> unsigned_distance_batch(std::span<const Vec3> points) const;
  std::vector<char> inside_batch(std::span<const Vec3> points) const;

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;   // child indices, -1 for leaves
    int right = -1;
    int begin = 0;   // range into order_ for leaves
    int end = 0;
    int min_face = 0;
  };

  int build(int begin, int end, std::vector<Vec3>& centroids);
  double min_distance(const Vec3& p) const;
  int lowest_face_within(const Vec3& p, double threshold) const;
  int count_crossings(const Vec3& p, const Vec3& dir, bool& grazing) const;

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace sidefield::geom
