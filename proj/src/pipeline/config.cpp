#include "sidefield/pipeline/config.hpp"

#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"

namespace sidefield::pipeline {

PipelineConfig PipelineConfig::from_preset(const std::string& name) {
  PipelineConfig c;
  c.preset = name;
  if (name == "desk") {
    c.data = data::ScanConfig::desk();
    c.model = training::ModelConfig::desk();
    c.train = training::TrainConfig::desk();
    c.recon = extraction::ReconConfig::desk();
    c.refine = texture::RefineConfig::desk();
    c.eval = eval::EvalConfig::desk();
    c.train.views = {c.input_view};
  } else if (name == "paper") {
    c.data = data::ScanConfig::paper();
    c.model = training::ModelConfig::paper();
    c.train = training::TrainConfig::paper();
    c.recon = extraction::ReconConfig::paper();
    c.refine = texture::RefineConfig::paper();
    c.eval = eval::EvalConfig::paper();
    c.subjects = 490;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return c;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig c = from_preset(j.value("preset", std::string("desk")));
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "preset") continue;
      if (key == "subjects") c.subjects = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "input_view") c.input_view = value.get<int>();
      else if (key == "data") c.data = data::ScanConfig::from_json(value, c.data);
      else if (key == "model") c.model = training::ModelConfig::from_json(value, c.model);
      else if (key == "train") c.train = training::TrainConfig::from_json(value, c.train);
      else if (key == "recon") c.recon = extraction::ReconConfig::from_json(value, c.recon);
      else if (key == "refine") c.refine = texture::RefineConfig::from_json(value, c.refine);
      else if (key == "eval") c.eval = eval::EvalConfig::from_json(value, c.eval);
      else if (key == "robustness") c.robustness = eval::RobustnessConfig::from_json(value, c.robustness);
      else throw ConfigError("unknown pipeline config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  if (c.subjects < 1) throw ConfigError("subjects must be >= 1");
  if (c.input_view < 0 || c.input_view >= c.data.views) throw ConfigError("input_view outside the camera ring");
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"preset", preset},           {"subjects", subjects},         {"seed", seed},
          {"input_view", input_view},   {"data", data.to_json()},       {"model", model.to_json()},
          {"train", train.to_json()},   {"recon", recon.to_json()},     {"refine", refine.to_json()},
          {"eval", eval.to_json()},     {"robustness", robustness.to_json()}};
}

}  // namespace sidefield::pipeline
