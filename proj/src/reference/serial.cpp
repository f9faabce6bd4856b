#include "sidefield/reference/serial.hpp"

#include <cmath>
#include <limits>

#include "sidefield/geom/triangle.hpp"

namespace sidefield::reference {

std::vector<geom::NearestFaceResult> nearest_faces(const geom::TriMesh& mesh, std::span<const Vec3> points) {
  std::vector<geom::NearestFaceResult> out(points.size());
  std::vector<double> dist(mesh.faces.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const auto& t = mesh.faces[f];
      dist[f] = std::sqrt(
          geom::closest_point_on_triangle(points[i], mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]])
              .distance_sq);
      best = std::min(best, dist[f]);
    }
    std::size_t face = 0;
    while (dist[face] > best + geom::kNearestTieTolerance) ++face;
    const auto& t = mesh.faces[face];
    const auto cp = geom::closest_point_on_triangle(points[i], mesh.vertices[t[0]], mesh.vertices[t[1]],
                                                    mesh.vertices[t[2]]);
    out[i].face = static_cast<int>(face);
    out[i].bary = cp.bary;
    out[i].closest = cp.point;
    out[i].distance = std::sqrt(cp.distance_sq);
  }
  return out;
}

extraction::OccupancyVolume evaluate_grid(const extraction::ScalarField& field, int resolution, const Vec3& lo,
                                          const Vec3& hi) {
  extraction::OccupancyVolume vol;
  vol.resolution = resolution;
  vol.lo = lo;
  vol.hi = hi;
  vol.values.resize(static_cast<std::size_t>(resolution) * resolution * resolution);
  for (int z = 0; z < resolution; ++z)
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x) {
        const Vec3 p = vol.node(x, y, z);
        field(std::span<const Vec3>(&p, 1), std::span<double>(&vol.values[vol.index(x, y, z)], 1));
      }
  return vol;
}

std::vector<int> cosine_match(const Matrix& query, const Matrix& key) {
  std::vector<int> out(static_cast<std::size_t>(query.rows()));
  for (Eigen::Index p = 0; p < query.rows(); ++p) {
    const double qn = query.row(p).norm();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index q = 0; q < key.rows(); ++q) {
      const double d = 1.0 - query.row(p).dot(key.row(q)) / (qn * key.row(q).norm());
      if (d < best) {
        best = d;
        out[p] = static_cast<int>(q);
      }
    }
  }
  return out;
}

namespace {

double directed(std::span<const Vec3> from, std::span<const Vec3> to) {
  double sum = 0.0;
  for (const Vec3& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double color_chamfer(std::span<const Vec3> a, std::span<const Vec3> b) { return 0.5 * (directed(a, b) + directed(b, a)); }

Matrix sparse_apply(const SparseMatrix& weights, const Matrix& texels) {
  Matrix out = Matrix::Zero(weights.rows(), texels.cols());
  for (Eigen::Index r = 0; r < weights.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(weights, r); it; ++it)
      for (Eigen::Index c = 0; c < texels.cols(); ++c) out(r, c) += it.value() * texels(it.col(), c);
  return out;
}

}  // namespace sidefield::reference
