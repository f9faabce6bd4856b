#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "sidefield/core/image.hpp"
#include "sidefield/core/rng.hpp"
#include "sidefield/geom/mesh.hpp"

namespace sidefield::eval {

/// Distances at or below this count as zero, so a surface sample measured
/// against its own mesh contributes exactly nothing.
inline constexpr double kZeroDistance = 1e-12;

/// Area-uniform samples on `from`, exact distance to the surface of `to`, averaged.
double mean_surface_distance(const geom::TriMesh& from, const geom::TriMesh& to, int n_samples, Rng& rng);

/// Symmetric mean of point-to-surface distances. Samples on a use Rng(seed_a),
/// samples on b use Rng(seed_b).
double chamfer(const geom::TriMesh& a, const geom::TriMesh& b, int n_samples, std::uint64_t seed_a,
               std::uint64_t seed_b);
/// Same with seed_a = Rng::derive(seed, 0), seed_b = Rng::derive(seed, 1).
double chamfer(const geom::TriMesh& a, const geom::TriMesh& b, int n_samples, std::uint64_t seed);

/// Mean distance from ground-truth samples (Rng::derive(seed, 1)) to the reconstruction.
double p2s(const geom::TriMesh& recon, const geom::TriMesh& gt, int n_samples, std::uint64_t seed);

struct ViewError {
  double yaw_deg = 0.0;
  double value = 0.0;
  int pixels = 0;
};

/// Per view: mean over the union of both silhouettes of the L2 distance between
/// encoded normal pixels (background encodes as zero). Views with an empty
/// union contribute 0. Returns the per-view values; the metric is their mean.
std::vector<ViewError> normal_error_views(const geom::TriMesh& a, const geom::TriMesh& b,
                                          const std::vector<double>& yaws, int resolution);
double normal_error(const geom::TriMesh& a, const geom::TriMesh& b, const std::vector<double>& yaws, int resolution);

/// 10 log10(1 / MSE) for unit-range images over all values, or over masked
/// pixels when a mask is given. Identical inputs give +infinity.
double psnr(const Image& a, const Image& b, const std::vector<char>* mask = nullptr);

/// +infinity serializes as the string "inf".
nlohmann::json metric_value(double v);

struct MetricReport {
  double chamfer = 0.0;  // scene units
  double p2s = 0.0;
  double normal_error = 0.0;
  std::optional<double> psnr;  // dB, only when a color comparison was run
  double scan_scale_cm = 100.0;
  std::vector<ViewError> normal_views;
  std::vector<ViewError> psnr_views;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const;
};

struct EvalConfig {
  int samples = 10000;
  std::vector<double> yaws = {0.0, 90.0, 180.0, 270.0};
  int resolution = 64;
  std::uint64_t seed = 17;
  double scan_scale_cm = 100.0;

  static EvalConfig desk();
  static EvalConfig paper();  // 100,000 samples, 512 px
  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j, const EvalConfig& base);
};

/// Geometry metrics plus, when both meshes carry colors, PSNR of vertex-color
/// renders over the union of the silhouettes at the evaluation yaws.
MetricReport evaluate(const geom::TriMesh& recon, const geom::TriMesh& gt, const EvalConfig& config);

}  // namespace sidefield::eval
