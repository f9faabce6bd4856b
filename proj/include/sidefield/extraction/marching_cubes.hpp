#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sidefield/core/types.hpp"
#include "sidefield/geom/mesh.hpp"

namespace sidefield::extraction {

/// Scalar samples on a regular lattice of resolution^3 nodes spanning
/// [lo, hi]. Node (x, y, z) is stored at (z * R + y) * R + x.
struct OccupancyVolume {
  int resolution = 0;
  Vec3 lo = Vec3::Constant(-1.0);
  Vec3 hi = Vec3::Constant(1.0);
  std::vector<double> values;

  Vec3 spacing() const { return (hi - lo) / static_cast<double>(resolution - 1); }
  Vec3 node(int x, int y, int z) const {
    return lo + spacing().cwiseProduct(Vec3(x, y, z));
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * resolution + y) * resolution + x;
  }
  double at(int x, int y, int z) const { return values[index(x, y, z)]; }
  double& at(int x, int y, int z) { return values[index(x, y, z)]; }
};

struct ExtractedMesh {
  geom::TriMesh mesh;
  bool empty = true;  // no iso-crossing anywhere in the volume
};

/// Marching cubes with the 256-case table and linear inverse interpolation
/// along crossing edges. Nodes with value >= iso are inside; faces are wound
/// counter-clockwise seen from outside. Vertices are shared between cells;
/// collapsed faces from exact node hits are welded away.
ExtractedMesh marching_cubes(const OccupancyVolume& volume, double iso = 0.5);

/// Batch field evaluation: writes one value per point.
using ScalarField = std::function<void(std::span<const Vec3> points, std::span<double> out)>;
using ColorField = std::function<void(std::span<const Vec3> points, std::span<Vec3> out)>;

/// Evaluates the field at every lattice node in chunks. Requires resolution >= 8
/// and bounds enclosing [-1, 1]^3. The field may be called concurrently. The result does not
/// depend on chunk_size as long as the field is evaluated pointwise.
OccupancyVolume evaluate_grid(const ScalarField& field, int resolution, const Vec3& lo,
                              const Vec3& hi, int chunk_size = 4096);

/// Assigns every vertex the field color at its position.
void colorize(geom::TriMesh& mesh, const ColorField& field, int chunk_size = 4096);

}  // namespace sidefield::extraction
