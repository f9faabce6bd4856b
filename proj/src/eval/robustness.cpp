#include "sidefield/eval/robustness.hpp"

#include <cmath>

#include "sidefield/core/error.hpp"
#include "sidefield/geom/camera.hpp"

namespace sidefield::eval {

nlohmann::json RobustnessConfig::to_json() const { return {{"noise_scale", noise_scale}, {"seeds", seeds}}; }

RobustnessConfig RobustnessConfig::from_json(const nlohmann::json& j, const RobustnessConfig& base) {
  if (!j.is_object()) throw ConfigError("robustness config must be an object");
  RobustnessConfig c = base;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "noise_scale") c.noise_scale = value.get<double>();
      else if (key == "seeds") c.seeds = value.get<std::vector<std::uint64_t>>();
      else throw ConfigError("unknown robustness config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("robustness config: ") + e.what());
  }
  if (!(c.noise_scale >= 0.0)) throw ConfigError("noise scale must be >= 0");
  if (c.seeds.empty()) throw ConfigError("robustness needs at least one seed");
  return c;
}

nlohmann::json RobustnessReport::to_json() const {
  nlohmann::json runs_json = nlohmann::json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    nlohmann::json r = runs[i].to_json();
    r["seed"] = seeds[i];
    runs_json.push_back(std::move(r));
  }
  return {{"noise_scale", noise_scale}, {"clean", clean.to_json()}, {"runs", runs_json}, {"mean", mean.to_json()},
          {"chamfer_degradation", mean.chamfer - clean.chamfer}};
}

EvalConfig relative_to_view(EvalConfig eval, double input_yaw_deg) {
  for (double& y : eval.yaws) y += input_yaw_deg;
  return eval;
}

geom::TriMesh reconstruct_world(const training::FieldModel& model, const Image& input, double input_yaw_deg,
                                const body::BodyParams& body, const extraction::ReconConfig& recon) {
  extraction::Reconstruction r = extraction::reconstruct(model, input, body, recon, input_yaw_deg);
  if (r.empty) throw ContractViolation("reconstruction produced no surface");
  if (input_yaw_deg == 0.0) return std::move(r.mesh);
  return geom::transformed(r.mesh, geom::yaw_rotation(input_yaw_deg).transpose(), Vec3::Zero());
}

RobustnessReport robustness_eval(const training::FieldModel& model, const Image& input, double input_yaw_deg,
                                 const body::BodyParams& body, const geom::TriMesh& gt,
                                 const RobustnessConfig& config, const extraction::ReconConfig& recon,
                                 const EvalConfig& eval_config) {
  const EvalConfig ec = relative_to_view(eval_config, input_yaw_deg);
  RobustnessReport rep;
  rep.noise_scale = config.noise_scale;
  rep.seeds = config.seeds;
  rep.clean = evaluate(reconstruct_world(model, input, input_yaw_deg, body, recon), gt, ec);
  for (std::uint64_t seed : config.seeds) {
    Rng rng(seed);
    const body::BodyParams noisy = body::perturb_params(body, config.noise_scale, rng);
    rep.runs.push_back(evaluate(reconstruct_world(model, input, input_yaw_deg, noisy, recon), gt, ec));
  }
  rep.mean = rep.clean;
  rep.mean.chamfer = rep.mean.p2s = rep.mean.normal_error = 0.0;
  rep.mean.normal_views.clear();
  rep.mean.psnr_views.clear();
  double psnr_sum = 0.0;
  bool psnr_ok = true;
  const double n = static_cast<double>(rep.runs.size());
  for (const auto& r : rep.runs) {
    rep.mean.chamfer += r.chamfer / n;
    rep.mean.p2s += r.p2s / n;
    rep.mean.normal_error += r.normal_error / n;
    if (r.psnr && std::isfinite(*r.psnr)) psnr_sum += *r.psnr / n;
    else psnr_ok = false;
  }
  rep.mean.psnr = psnr_ok ? std::optional<double>(psnr_sum) : std::nullopt;
  return rep;
}

}  // namespace sidefield::eval
