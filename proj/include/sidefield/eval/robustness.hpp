#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "sidefield/body/body_model.hpp"
#include "sidefield/eval/metrics.hpp"
#include "sidefield/extraction/reconstruct.hpp"
#include "sidefield/training/field_model.hpp"

namespace sidefield::eval {

struct RobustnessConfig {
  double noise_scale = 0.05;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  nlohmann::json to_json() const;
  static RobustnessConfig from_json(const nlohmann::json& j, const RobustnessConfig& base);
};

struct RobustnessReport {
  double noise_scale = 0.0;
  MetricReport clean;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricReport> runs;
  MetricReport mean;  // per-metric mean over runs; PSNR only if every run has a finite one

  nlohmann::json to_json() const;
};

/// Reconstructs once with the exact body parameters and once per seed with
/// perturb_params(body, noise_scale, Rng(seed)), evaluating each against the
/// ground truth. The input view has camera yaw input_yaw_deg; gt is in the
/// world frame and reconstructions are rotated back into it.
RobustnessReport robustness_eval(const training::FieldModel& model, const Image& input, double input_yaw_deg,
                                 const body::BodyParams& body, const geom::TriMesh& gt,
                                 const RobustnessConfig& config, const extraction::ReconConfig& recon,
                                 const EvalConfig& eval);

/// Reconstruction at the given input yaw, returned in the world frame.
/// Throws ContractViolation if the extracted surface is empty.
geom::TriMesh reconstruct_world(const training::FieldModel& model, const Image& input, double input_yaw_deg,
                                const body::BodyParams& body, const extraction::ReconConfig& recon);

/// Evaluation yaws shifted by the input yaw (yaws are relative to the input view).
EvalConfig relative_to_view(EvalConfig eval, double input_yaw_deg);

}  // namespace sidefield::eval
