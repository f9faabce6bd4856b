#include "sidefield/eval/metrics.hpp"

#include <cmath>
#include <limits>

#include "sidefield/body/normal_render.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/geom/camera.hpp"
#include "sidefield/geom/shading.hpp"
#include "sidefield/geom/surface_index.hpp"

namespace sidefield::eval {

namespace {

void require_nonempty(const geom::TriMesh& m, const char* what) {
  if (m.faces.empty()) throw ContractViolation(std::string(what) + ": mesh is empty");
  geom::validate(m);
  if (!(geom::total_area(m) > 0)) throw ContractViolation(std::string(what) + ": mesh has zero area");
}

}  // namespace

double mean_surface_distance(const geom::TriMesh& from, const geom::TriMesh& to, int n_samples, Rng& rng) {
  if (n_samples <= 0) throw ContractViolation("mean_surface_distance: n_samples must be positive");
  require_nonempty(from, "mean_surface_distance");
  require_nonempty(to, "mean_surface_distance");
  const geom::AreaSampler sampler(from);
  std::vector<Vec3> pts(n_samples);
  for (Vec3& p : pts) p = sampler.sample(rng).point;
  const geom::SurfaceIndex index(to);
  const std::vector<double> d = index.unsigned_distance_batch(pts);
  double sum = 0.0;
  for (double v : d) sum += v <= kZeroDistance ? 0.0 : v;
  return sum / n_samples;
}

double chamfer(const geom::TriMesh& a, const geom::TriMesh& b, int n_samples, std::uint64_t seed_a,
               std::uint64_t seed_b) {
  Rng ra(seed_a), rb(seed_b);
  const double ab = mean_surface_distance(a, b, n_samples, ra);
  const double ba = mean_surface_distance(b, a, n_samples, rb);
  return 0.5 * (ab + ba);
}

double chamfer(const geom::TriMesh& a, const geom::TriMesh& b, int n_samples, std::uint64_t seed) {
  return chamfer(a, b, n_samples, Rng::derive(seed, 0), Rng::derive(seed, 1));
}

double p2s(const geom::TriMesh& recon, const geom::TriMesh& gt, int n_samples, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 1));
  return mean_surface_distance(gt, recon, n_samples, rng);
}

std::vector<ViewError> normal_error_views(const geom::TriMesh& a, const geom::TriMesh& b,
                                          const std::vector<double>& yaws, int resolution) {
  if (yaws.empty()) throw ContractViolation("normal_error: no views");
  std::vector<ViewError> out;
  for (double yaw : yaws) {
    geom::Camera cam;
    cam.yaw_deg = yaw;
    cam.resolution = resolution;
    const auto na = body::render_normal_map(a, cam);
    const auto nb = body::render_normal_map(b, cam);
    ViewError ve{yaw, 0.0, 0};
    double sum = 0.0;
    for (std::size_t i = 0; i < na.mask.size(); ++i) {
      if (!na.mask[i] && !nb.mask[i]) continue;
      double sq = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = na.pixels.data[3 * i + c] - nb.pixels.data[3 * i + c];
        sq += d * d;
      }
      sum += std::sqrt(sq);
      ++ve.pixels;
    }
    ve.value = ve.pixels > 0 ? sum / ve.pixels : 0.0;
    out.push_back(ve);
  }
  return out;
}

double normal_error(const geom::TriMesh& a, const geom::TriMesh& b, const std::vector<double>& yaws, int resolution) {
  const auto views = normal_error_views(a, b, yaws, resolution);
  double sum = 0.0;
  for (const auto& v : views) sum += v.value;
  return sum / static_cast<double>(views.size());
}

double psnr(const Image& a, const Image& b, const std::vector<char>* mask) {
  if (!a.same_shape(b)) throw ContractViolation("psnr: image shapes differ");
  if (mask && mask->size() != a.pixel_count()) throw ContractViolation("psnr: mask size mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (mask && !(*mask)[p]) continue;
    for (int c = 0; c < a.channels; ++c) {
      const double d = a.data[p * a.channels + c] - b.data[p * a.channels + c];
      sum += d * d;
      ++count;
    }
  }
  if (count == 0) throw ContractViolation("psnr: no pixels to compare");
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(count) / sum);
}

nlohmann::json metric_value(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["units"] = {{"distance", "scene units"}, {"distance_cm", "centimetres"}, {"psnr", "dB"}};
  j["chamfer"] = chamfer;
  j["chamfer_cm"] = chamfer * scan_scale_cm;
  j["p2s"] = p2s;
  j["p2s_cm"] = p2s * scan_scale_cm;
  j["normal_error"] = normal_error;
  j["psnr"] = psnr ? metric_value(*psnr) : nlohmann::json(nullptr);
  j["scan_scale_cm"] = scan_scale_cm;
  auto views = nlohmann::json::array();
  for (const auto& v : normal_views) views.push_back({{"yaw", v.yaw_deg}, {"value", v.value}, {"pixels", v.pixels}});
  j["normal_views"] = views;
  auto pviews = nlohmann::json::array();
  for (const auto& v : psnr_views)
    pviews.push_back({{"yaw", v.yaw_deg}, {"value", metric_value(v.value)}, {"pixels", v.pixels}});
  j["psnr_views"] = pviews;
  j["config"] = config;
  return j;
}

EvalConfig EvalConfig::desk() { return EvalConfig{}; }

EvalConfig EvalConfig::paper() {
  EvalConfig c;
  c.samples = 100000;
  c.resolution = 512;
  return c;
}

nlohmann::json EvalConfig::to_json() const {
  return {{"samples", samples}, {"yaws", yaws}, {"resolution", resolution}, {"seed", seed},
          {"scan_scale_cm", scan_scale_cm}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j, const EvalConfig& base) {
  if (!j.is_object()) throw ConfigError("eval config must be an object");
  EvalConfig c = base;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "samples") c.samples = value.get<int>();
      else if (key == "yaws") c.yaws = value.get<std::vector<double>>();
      else if (key == "resolution") c.resolution = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "scan_scale_cm") c.scan_scale_cm = value.get<double>();
      else throw ConfigError("unknown eval config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("eval config: ") + e.what());
  }
  if (c.samples < 1 || c.resolution < 1 || c.yaws.empty()) throw ConfigError("eval config: invalid sizes");
  if (!(c.scan_scale_cm > 0)) throw ConfigError("eval config: scan_scale_cm must be positive");
  return c;
}

MetricReport evaluate(const geom::TriMesh& recon, const geom::TriMesh& gt, const EvalConfig& config) {
  MetricReport r;
  r.scan_scale_cm = config.scan_scale_cm;
  r.config = config.to_json();
  Rng ra(Rng::derive(config.seed, 0)), rb(Rng::derive(config.seed, 1));
  const double recon_to_gt = mean_surface_distance(recon, gt, config.samples, ra);
  const double gt_to_recon = mean_surface_distance(gt, recon, config.samples, rb);
  r.chamfer = 0.5 * (recon_to_gt + gt_to_recon);
  r.p2s = gt_to_recon;
  r.normal_views = normal_error_views(recon, gt, config.yaws, config.resolution);
  double sum = 0.0;
  for (const auto& v : r.normal_views) sum += v.value;
  r.normal_error = sum / static_cast<double>(r.normal_views.size());

  if (recon.has_colors() && gt.has_colors()) {
    double total_sq = 0.0;
    std::size_t total_count = 0;
    for (double yaw : config.yaws) {
      geom::Camera cam;
      cam.yaw_deg = yaw;
      cam.resolution = config.resolution;
      std::vector<char> ma, mb;
      const Image ia = geom::render_vertex_colors(recon, cam, &ma);
      const Image ib = geom::render_vertex_colors(gt, cam, &mb);
      std::vector<char> uni(ma.size());
      int pixels = 0;
      for (std::size_t i = 0; i < ma.size(); ++i) pixels += (uni[i] = static_cast<char>(ma[i] || mb[i]));
      ViewError ve{yaw, std::numeric_limits<double>::infinity(), pixels};
      if (pixels > 0) {
        ve.value = psnr(ia, ib, &uni);
        for (std::size_t p = 0; p < uni.size(); ++p) {
          if (!uni[p]) continue;
          for (int c = 0; c < 3; ++c) {
            const double d = ia.data[3 * p + c] - ib.data[3 * p + c];
            total_sq += d * d;
          }
          total_count += 3;
        }
      }
      r.psnr_views.push_back(ve);
    }
    if (total_count > 0)
      r.psnr = total_sq == 0.0 ? std::numeric_limits<double>::infinity()
                               : 10.0 * std::log10(static_cast<double>(total_count) / total_sq);
  }
  return r;
}

}  // namespace sidefield::eval
