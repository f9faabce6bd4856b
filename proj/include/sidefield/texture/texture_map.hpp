#pragma once

#include <array>
#include <vector>

#include "json.hpp"
#include "sidefield/core/image.hpp"
#include "sidefield/core/types.hpp"
#include "sidefield/geom/mesh.hpp"

namespace sidefield::texture {

struct UvConfig {
  int resolution = 256;
  double margin = 1.0;  // texels between a chart and its cell border
  double gap = 1.0;     // texels between the two charts of a cell, along each axis

  static UvConfig desk() { return {}; }
  static UvConfig paper() { return {1024, 1.0, 1.0}; }
  nlohmann::json to_json() const;
  static UvConfig from_json(const nlohmann::json& j, UvConfig base);
};

/// Square RGB atlas. Faces are charted two per grid cell: even faces take the
/// lower-left right triangle of their cell, odd faces the upper-right one.
/// UVs are stored per face corner (3 per face), u to the right, v downwards,
/// both in [0,1]; texel (x, y) has its center at ((x+0.5)/R, (y+0.5)/R).
struct TextureMap {
  Image texels;                // R x R x 3
  std::vector<double> coverage;  // 1 for texels owned by a face chart, else 0
  std::vector<Vec2> uvs;       // 3 * faces
  int grid = 0;                // cells per atlas row

  int resolution() const { return texels.width; }
  std::size_t texel_count() const { return texels.pixel_count(); }
  Vec2 uv(int face, int corner) const { return uvs[3 * static_cast<std::size_t>(face) + corner]; }

  /// Texels as a (R*R) x 3 matrix, row = y * R + x.
  Matrix as_matrix() const;
  void set_from_matrix(const Matrix& m);

  /// JSON chart manifest: resolution, grid, per-corner UVs.
  nlohmann::json manifest() const;
};

/// Lays out one chart per face. Throws ConfigError if a cell would be
/// too small to hold two charts with margins.
TextureMap make_atlas(int face_count, const UvConfig& config);

/// Atlas plus back-projection of per-vertex colors: each texel owned by a
/// chart takes the barycentric color of the closest point of its face's UV
/// triangle; unowned texels get the mean owned color.
TextureMap unwrap_and_backproject(const geom::TriMesh& mesh, const UvConfig& config);

struct BilinearTap {
  std::array<int, 4> texel{};     // flat texel indices
  std::array<double, 4> weight{};  // sums to 1
};

/// Bilinear lookup at texel-center convention with edge clamping.
BilinearTap bilinear_tap(const Vec2& uv, int resolution);
Vec3 sample(const TextureMap& tex, const Vec2& uv);

}  // namespace sidefield::texture
