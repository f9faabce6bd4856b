#pragma once

#include <vector>

#include "json.hpp"
#include "sidefield/core/rng.hpp"
#include "sidefield/geom/mesh.hpp"
#include "sidefield/geom/surface_index.hpp"

namespace sidefield::training {

struct SamplingConfig {
  double surface_sigma = 0.05;         // Gaussian offset of near-surface occupancy samples
  double uniform_fraction = 1.0 / 16;  // share drawn uniformly in the query cube
  double color_sigma_cm = 0.1;         // offset along the normal of color samples
  double cube = 1.0;                   // uniform samples fill [-cube, cube]^3

  nlohmann::json to_json() const;
  static SamplingConfig from_json(const nlohmann::json& j, const SamplingConfig& base);
};

struct OccupancySamples {
  std::vector<Vec3> points;
  Matrix labels;  // n x 1, 1 inside
};

struct ColorSamples {
  std::vector<Vec3> points;
  Matrix colors;  // n x 3
};

/// 1 iff the point is inside the closed mesh; surface points are inside.
double occupancy_label(const geom::SurfaceIndex& mesh, const Vec3& point);

/// Near-surface samples first (area-uniform surface point plus isotropic
/// Gaussian offset), then the uniform ones. The uniform count is
/// round(n * uniform_fraction).
OccupancySamples sample_occupancy_points(const geom::TriMesh& mesh, const geom::SurfaceIndex& index, int n,
                                         const SamplingConfig& config, Rng& rng);

/// Area-uniform surface samples moved by N(0, sigma) along the face normal,
/// labelled with the barycentric vertex color of the source point.
ColorSamples sample_color_points(const geom::TriMesh& mesh, int n, double sigma, Rng& rng);

/// Mean binary cross-entropy; predictions are clamped to [1e-12, 1 - 1e-12].
double occupancy_loss(const Matrix& pred, const Matrix& labels);
/// Mean absolute error over all entries.
double color_loss(const Matrix& pred, const Matrix& labels);

}  // namespace sidefield::training
