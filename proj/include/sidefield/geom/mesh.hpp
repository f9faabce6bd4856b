#pragma once

#include <utility>
#include <vector>

#include "sidefield/core/rng.hpp"
#include "sidefield/core/types.hpp"

namespace sidefield::geom {

/// Indexed triangle mesh with optional per-vertex colors in [0,1]^3.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> colors;  // empty, or one entry per vertex

  bool empty() const { return faces.empty(); }
  bool has_colors() const { return !colors.empty() && colors.size() == vertices.size(); }
};

struct TopologyReport {
  int boundary_edges = 0;      // edges used by exactly one face
  int nonmanifold_edges = 0;   // edges used by more than two faces
  int misoriented_edges = 0;   // interior edges traversed twice in the same direction
  bool closed() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
  bool consistent() const { return misoriented_edges == 0; }
};

/// Throws ContractViolation on out-of-range indices, mismatched color count or
/// non-finite coordinates.
void validate(const TriMesh& mesh);

TopologyReport check_topology(const TriMesh& mesh);

Vec3 face_normal_unnormalized(const TriMesh& mesh, int f);
double face_area(const TriMesh& mesh, int f);
double total_area(const TriMesh& mesh);

/// Area-weighted vertex normals, unit length (zero for isolated vertices).
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

/// Positive when faces are wound counter-clockwise seen from outside.
double signed_volume(const TriMesh& mesh);

std::pair<Vec3, Vec3> bounding_box(const TriMesh& mesh);

/// Applies x -> R x + t to every vertex. Colors and faces are kept.
TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation);

/// Reverses the winding of every face.
void flip_winding(TriMesh& mesh);

/// Merges vertices with bitwise-equal positions, drops faces that collapse
/// (repeated index or area below min_area) and vertices no face references.
void weld_and_clean(TriMesh& mesh, double min_area = 1e-12);

struct SurfaceSample {
  int face = -1;
  Vec3 bary = Vec3::Zero();
  Vec3 point = Vec3::Zero();
};

/// Uniform-by-area surface sampling.
class AreaSampler {
 public:
  explicit AreaSampler(const TriMesh& mesh);
  SurfaceSample sample(Rng& rng) const;

 private:
  const TriMesh* mesh_;
  std::vector<double> cumulative_;
};

/// Standard icosphere (subdivided icosahedron projected onto the sphere).
TriMesh make_icosphere(int subdivisions, double radius = 1.0, const Vec3& center = Vec3::Zero());

/// Axis-aligned box with outward winding, 8 vertices and 12 faces.
TriMesh make_box(const Vec3& lo, const Vec3& hi);

}  // namespace sidefield::geom
