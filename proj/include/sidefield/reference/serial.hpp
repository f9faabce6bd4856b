#pragma once

// Single-threaded, acceleration-free versions of the parallel kernels. They
// share the per-element math with the library (closest-point, field
// evaluation) so results must agree exactly; tests and the benchmark compare
// against them.

#include <span>
#include <vector>

#include "sidefield/core/types.hpp"
#include "sidefield/extraction/marching_cubes.hpp"
#include "sidefield/geom/mesh.hpp"
#include "sidefield/geom/surface_index.hpp"

namespace sidefield::reference {

/// Nearest face by scanning every triangle. Same tie rule as SurfaceIndex;
/// `inside` is left false.
std::vector<geom::NearestFaceResult> nearest_faces(const geom::TriMesh& mesh, std::span<const Vec3> points);

/// One field call per lattice node, x fastest.
extraction::OccupancyVolume evaluate_grid(const extraction::ScalarField& field, int resolution, const Vec3& lo,
                                          const Vec3& hi);

/// Row-wise argmin of cosine distance, ties to the lowest key row.
std::vector<int> cosine_match(const Matrix& query, const Matrix& key);

/// Symmetric color Chamfer without subsampling.
double color_chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// weights * texels by explicit loops over the stored entries.
Matrix sparse_apply(const SparseMatrix& weights, const Matrix& texels);

}  // namespace sidefield::reference
