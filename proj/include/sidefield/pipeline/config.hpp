#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "sidefield/data/synthetic.hpp"
#include "sidefield/eval/metrics.hpp"
#include "sidefield/eval/robustness.hpp"
#include "sidefield/extraction/reconstruct.hpp"
#include "sidefield/texture/optimize.hpp"
#include "sidefield/training/field_model.hpp"
#include "sidefield/training/trainer.hpp"

namespace sidefield::pipeline {

/// Every module configuration for one run. JSON form:
///   {"preset": "desk"|"paper", "subjects": n, "seed": s, "input_view": i,
///    "data": {...}, "model": {...}, "train": {...}, "recon": {...},
///    "refine": {...}, "eval": {...}, "robustness": {...}}
/// The preset supplies every value; the blocks override individual keys.
struct PipelineConfig {
  std::string preset = "desk";
  int subjects = 1;
  std::uint64_t seed = 1;
  int input_view = 0;
  data::ScanConfig data;
  training::ModelConfig model;
  training::TrainConfig train;
  extraction::ReconConfig recon;
  texture::RefineConfig refine;
  eval::EvalConfig eval;
  eval::RobustnessConfig robustness;

  static PipelineConfig from_preset(const std::string& name);
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

}  // namespace sidefield::pipeline
