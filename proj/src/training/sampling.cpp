#include "sidefield/training/sampling.hpp"

#include <cmath>

#include "sidefield/ad/tape.hpp"
#include "sidefield/core/error.hpp"

namespace sidefield::training {

nlohmann::json SamplingConfig::to_json() const {
  return {{"surface_sigma", surface_sigma},
          {"uniform_fraction", uniform_fraction},
          {"color_sigma_cm", color_sigma_cm},
          {"cube", cube}};
}

SamplingConfig SamplingConfig::from_json(const nlohmann::json& j, const SamplingConfig& base) {
  if (!j.is_object()) throw ConfigError("sampling config must be an object");
  SamplingConfig c = base;
  for (const auto& [key, value] : j.items()) {
    if (key == "surface_sigma") c.surface_sigma = value.get<double>();
    else if (key == "uniform_fraction") c.uniform_fraction = value.get<double>();
    else if (key == "color_sigma_cm") c.color_sigma_cm = value.get<double>();
    else if (key == "cube") c.cube = value.get<double>();
    else throw ConfigError("unknown sampling config key: " + key);
  }
  if (c.surface_sigma < 0 || c.color_sigma_cm < 0) throw ConfigError("sampling sigmas must be >= 0");
  if (c.uniform_fraction < 0 || c.uniform_fraction > 1) throw ConfigError("uniform_fraction must be in [0, 1]");
  if (!(c.cube > 0)) throw ConfigError("sampling cube must be positive");
  return c;
}

double occupancy_label(const geom::SurfaceIndex& mesh, const Vec3& point) {
  if (!point.allFinite()) throw ContractViolation("occupancy_label: non-finite point");
  return mesh.inside(point) ? 1.0 : 0.0;
}

OccupancySamples sample_occupancy_points(const geom::TriMesh& mesh, const geom::SurfaceIndex& index, int n,
                                         const SamplingConfig& config, Rng& rng) {
  if (n <= 0) throw ContractViolation("sample_occupancy_points: n must be positive");
  const int uniform = static_cast<int>(std::lround(n * config.uniform_fraction));
  const geom::AreaSampler sampler(mesh);
  OccupancySamples out;
  out.points.reserve(n);
  for (int i = 0; i < n - uniform; ++i) {
    Vec3 p = sampler.sample(rng).point;
    if (config.surface_sigma > 0) {
      const double dx = rng.normal(), dy = rng.normal(), dz = rng.normal();
      p += config.surface_sigma * Vec3(dx, dy, dz);
    }
    out.points.push_back(p);
  }
  for (int i = 0; i < uniform; ++i) {
    const double x = rng.uniform(-config.cube, config.cube);
    const double y = rng.uniform(-config.cube, config.cube);
    const double z = rng.uniform(-config.cube, config.cube);
    out.points.emplace_back(x, y, z);
  }
  const auto inside = index.inside_batch(out.points);
  out.labels.resize(n, 1);
  for (int i = 0; i < n; ++i) out.labels(i, 0) = inside[i] ? 1.0 : 0.0;
  return out;
}

ColorSamples sample_color_points(const geom::TriMesh& mesh, int n, double sigma, Rng& rng) {
  if (n <= 0) throw ContractViolation("sample_color_points: n must be positive");
  if (!(sigma >= 0)) throw ContractViolation("sample_color_points: sigma must be >= 0");
  if (!mesh.has_colors()) throw ContractViolation("sample_color_points: mesh has no vertex colors");
  const geom::AreaSampler sampler(mesh);
  ColorSamples out;
  out.points.reserve(n);
  out.colors.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    const geom::SurfaceSample s = sampler.sample(rng);
    const Face& f = mesh.faces[s.face];
    Vec3 p = s.point;
    if (sigma > 0) p += sigma * rng.normal() * geom::face_normal_unnormalized(mesh, s.face).normalized();
    out.points.push_back(p);
    const Vec3 c = s.bary[0] * mesh.colors[f[0]] + s.bary[1] * mesh.colors[f[1]] + s.bary[2] * mesh.colors[f[2]];
    out.colors.row(i) = c.cwiseMax(0.0).cwiseMin(1.0).transpose();
  }
  return out;
}

double occupancy_loss(const Matrix& pred, const Matrix& labels) {
  ad::Tape t(false);
  return t.value(t.bce_mean(t.constant(pred), labels))(0, 0);
}

double color_loss(const Matrix& pred, const Matrix& labels) {
  ad::Tape t(false);
  return t.value(t.l1_mean(t.constant(pred), labels))(0, 0);
}

}  // namespace sidefield::training
