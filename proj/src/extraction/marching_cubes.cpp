#include "sidefield/extraction/marching_cubes.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"
#include "sidefield/extraction/mc_tables.hpp"

namespace sidefield::extraction {

namespace {

using EdgeKey = std::int64_t;

// Edge keys encode the lower lattice node and the axis of the edge.
EdgeKey edge_key(const OccupancyVolume& vol, int x, int y, int z, int axis) {
  return static_cast<EdgeKey>(vol.index(x, y, z)) * 3 + axis;
}

struct SlabTriangles {
  std::vector<std::array<EdgeKey, 3>> tris;
};

void march_slab(const OccupancyVolume& vol, double iso, int z, SlabTriangles& out) {
  const int r = vol.resolution;
  for (int y = 0; y + 1 < r; ++y) {
    for (int x = 0; x + 1 < r; ++x) {
      int cube = 0;
      for (int c = 0; c < 8; ++c) {
        const auto& o = tables::kCorner[c];
        if (vol.at(x + o[0], y + o[1], z + o[2]) < iso) cube |= 1 << c;
      }
      if (cube == 0 || cube == 255) continue;
      const auto& row = tables::kTriangles[cube];
      for (int t = 0; row[t] != -1; t += 3) {
        std::array<EdgeKey, 3> tri;
        for (int k = 0; k < 3; ++k) {
          const auto& ec = tables::kEdgeCorners[row[t + k]];
          const auto& a = tables::kCorner[ec[0]];
          const auto& b = tables::kCorner[ec[1]];
          int axis = 0;
          while (a[axis] == b[axis]) ++axis;
          tri[k] = edge_key(vol, x + std::min(a[0], b[0]), y + std::min(a[1], b[1]),
                            z + std::min(a[2], b[2]), axis);
        }
        out.tris.push_back(tri);
      }
    }
  }
}

Vec3 edge_vertex(const OccupancyVolume& vol, EdgeKey key, double iso) {
  const int axis = static_cast<int>(key % 3);
  std::size_t node = static_cast<std::size_t>(key / 3);
  const int r = vol.resolution;
  const int x = static_cast<int>(node % r);
  const int y = static_cast<int>((node / r) % r);
  const int z = static_cast<int>(node / (static_cast<std::size_t>(r) * r));
  int x1 = x, y1 = y, z1 = z;
  (axis == 0 ? x1 : axis == 1 ? y1 : z1) += 1;
  const double va = vol.at(x, y, z);
  const double vb = vol.at(x1, y1, z1);
  const double t = std::clamp((iso - va) / (vb - va), 0.0, 1.0);
  const Vec3 pa = vol.node(x, y, z);
  const Vec3 pb = vol.node(x1, y1, z1);
  return pa + t * (pb - pa);
}

}  // namespace

ExtractedMesh marching_cubes(const OccupancyVolume& vol, double iso) {
  const int r = vol.resolution;
  if (r < 2 || vol.values.size() != static_cast<std::size_t>(r) * r * r)
    throw ContractViolation("marching_cubes: volume size does not match resolution");
  for (double v : vol.values)
    if (!std::isfinite(v)) throw ContractViolation("marching_cubes: volume contains non-finite values");

  std::vector<SlabTriangles> slabs(r - 1);
  parallel::for_each_index(r - 1, [&](std::int64_t z) { march_slab(vol, iso, static_cast<int>(z), slabs[z]); });

  // Deterministic merge in slab order.
  ExtractedMesh result;
  std::unordered_map<EdgeKey, int> vertex_of_edge;
  for (const auto& slab : slabs) {
    for (const auto& tri : slab.tris) {
      Face f;
      for (int k = 0; k < 3; ++k) {
        auto [it, inserted] = vertex_of_edge.try_emplace(tri[k], static_cast<int>(result.mesh.vertices.size()));
        if (inserted) result.mesh.vertices.push_back(edge_vertex(vol, tri[k], iso));
        f[k] = it->second;
      }
      result.mesh.faces.push_back(f);
    }
  }
  geom::weld_and_clean(result.mesh);
  result.empty = result.mesh.faces.empty();
  return result;
}

OccupancyVolume evaluate_grid(const ScalarField& field, int resolution, const Vec3& lo, const Vec3& hi,
                              int chunk_size) {
  if (resolution < 8) throw ContractViolation("evaluate_grid: resolution must be >= 8");
  if ((lo.array() > -1.0).any() || (hi.array() < 1.0).any())
    throw ContractViolation("evaluate_grid: bounds must enclose [-1, 1]^3");
  if (chunk_size <= 0) throw ContractViolation("evaluate_grid: chunk size must be positive");
  OccupancyVolume vol;
  vol.resolution = resolution;
  vol.lo = lo;
  vol.hi = hi;
  const std::size_t total = static_cast<std::size_t>(resolution) * resolution * resolution;
  vol.values.assign(total, 0.0);
  const std::int64_t chunks = static_cast<std::int64_t>((total + chunk_size - 1) / chunk_size);
  parallel::for_each_index(chunks, [&](std::int64_t c) {
    const std::size_t begin = static_cast<std::size_t>(c) * chunk_size;
    const std::size_t end = std::min(total, begin + chunk_size);
    std::vector<Vec3> pts(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const int x = static_cast<int>(i % resolution);
      const int y = static_cast<int>((i / resolution) % resolution);
      const int z = static_cast<int>(i / (static_cast<std::size_t>(resolution) * resolution));
      pts[i - begin] = vol.node(x, y, z);
    }
    field(pts, std::span<double>(vol.values.data() + begin, end - begin));
  });
  return vol;
}

void colorize(geom::TriMesh& mesh, const ColorField& field, int chunk_size) {
  if (chunk_size <= 0) throw ContractViolation("colorize: chunk size must be positive");
  mesh.colors.assign(mesh.vertices.size(), Vec3::Zero());
  const std::int64_t n = static_cast<std::int64_t>(mesh.vertices.size());
  const std::int64_t chunks = (n + chunk_size - 1) / chunk_size;
  parallel::for_each_index(chunks, [&](std::int64_t c) {
    const std::int64_t begin = c * chunk_size;
    const std::int64_t end = std::min(n, begin + chunk_size);
    field(std::span<const Vec3>(mesh.vertices.data() + begin, end - begin),
          std::span<Vec3>(mesh.colors.data() + begin, end - begin));
  });
  for (auto& c : mesh.colors) {
    if (!c.allFinite()) throw NumericalError("colorize: field returned a non-finite color");
    c = c.cwiseMax(0.0).cwiseMin(1.0);
  }
}

}  // namespace sidefield::extraction
