#include "sidefield/geom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>

#include "sidefield/core/error.hpp"

namespace sidefield::geom {

void validate(const TriMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    for (int idx : mesh.faces[f])
      if (idx < 0 || idx >= n)
        throw ContractViolation("face " + std::to_string(f) + " references vertex " +
                                std::to_string(idx) + " of " + std::to_string(n));
  for (const auto& v : mesh.vertices)
    if (!v.allFinite()) throw ContractViolation("mesh has a non-finite vertex");
  if (!mesh.colors.empty() && mesh.colors.size() != mesh.vertices.size())
    throw ContractViolation("color count does not match vertex count");
}

TopologyReport check_topology(const TriMesh& mesh) {
  // Directed edge (a, b) -> number of faces traversing it.
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) ++directed[{f[k], f[(k + 1) % 3]}];

  TopologyReport report;
  for (const auto& [edge, count] : directed) {
    const auto [a, b] = edge;
    if (a > b && directed.count({b, a})) continue;  // counted from the other side
    const auto rev = directed.find({b, a});
    const int opposite = rev == directed.end() ? 0 : rev->second;
    const int uses = count + opposite;
    if (uses == 1) ++report.boundary_edges;
    else if (uses > 2) ++report.nonmanifold_edges;
    else if (count != 1 || opposite != 1) ++report.misoriented_edges;
  }
  return report;
}

Vec3 face_normal_unnormalized(const TriMesh& mesh, int f) {
  const auto& t = mesh.faces[f];
  const Vec3& a = mesh.vertices[t[0]];
  return (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
}

double face_area(const TriMesh& mesh, int f) { return 0.5 * face_normal_unnormalized(mesh, f).norm(); }

double total_area(const TriMesh& mesh) {
  double a = 0.0;
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) a += face_area(mesh, f);
  return a;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    const Vec3 n = face_normal_unnormalized(mesh, f);  // length = 2 * area
    for (int idx : mesh.faces[f]) normals[idx] += n;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }
  return normals;
}

double signed_volume(const TriMesh& mesh) {
  double vol = 0.0;
  for (const auto& f : mesh.faces)
    vol += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
  return vol / 6.0;
}

std::pair<Vec3, Vec3> bounding_box(const TriMesh& mesh) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = rotation * v + translation;
  return out;
}

void flip_winding(TriMesh& mesh) {
  for (auto& f : mesh.faces) std::swap(f[1], f[2]);
}

void weld_and_clean(TriMesh& mesh, double min_area) {
  struct KeyHash {
    std::size_t operator()(const std::array<double, 3>& k) const {
      std::size_t h = 0;
      for (double d : k) h = h * 1000003u ^ std::hash<double>{}(d);
      return h;
    }
  };
  std::unordered_map<std::array<double, 3>, int, KeyHash> canonical;
  std::vector<int> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    auto [it, inserted] = canonical.try_emplace({v.x(), v.y(), v.z()}, static_cast<int>(i));
    remap[i] = it->second;
  }
  std::vector<Face> faces;
  faces.reserve(mesh.faces.size());
  for (auto f : mesh.faces) {
    for (int& idx : f) idx = remap[idx];
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
    const Vec3& a = mesh.vertices[f[0]];
    if (0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm() <= min_area) continue;
    faces.push_back(f);
  }
  std::vector<int> new_index(mesh.vertices.size(), -1);
  TriMesh out;
  const bool colored = mesh.has_colors();
  for (auto& f : faces) {
    for (int& idx : f) {
      if (new_index[idx] < 0) {
        new_index[idx] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[idx]);
        if (colored) out.colors.push_back(mesh.colors[idx]);
      }
      idx = new_index[idx];
    }
  }
  out.faces = std::move(faces);
  mesh = std::move(out);
}

AreaSampler::AreaSampler(const TriMesh& mesh) : mesh_(&mesh) {
  if (mesh.faces.empty()) throw ContractViolation("cannot sample an empty mesh");
  cumulative_.resize(mesh.faces.size());
  double acc = 0.0;
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    acc += face_area(mesh, f);
    cumulative_[f] = acc;
  }
  if (!(acc > 0.0)) throw ContractViolation("cannot sample a zero-area mesh");
}

SurfaceSample AreaSampler::sample(Rng& rng) const {
  const double target = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) --it;
  SurfaceSample s;
  s.face = static_cast<int>(it - cumulative_.begin());
  const double r1 = std::sqrt(rng.uniform());
  const double r2 = rng.uniform();
  s.bary = Vec3(1.0 - r1, r1 * (1.0 - r2), r1 * r2);
  const auto& t = mesh_->faces[s.face];
  s.point = s.bary[0] * mesh_->vertices[t[0]] + s.bary[1] * mesh_->vertices[t[1]] +
            s.bary[2] * mesh_->vertices[t[2]];
  return s;
}

TriMesh make_icosphere(int subdivisions, double radius, const Vec3& center) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const int idx = static_cast<int>(m.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  for (auto& v : m.vertices) v = center + radius * v;
  return m;
}

TriMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                            (i & 4) ? hi.z() : lo.z());
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},   // -z, +z
             {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},   // -y, +y
             {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};  // -x, +x
  return m;
}

}  // namespace sidefield::geom
