#include "sidefield/extraction/reconstruct.hpp"

#include "sidefield/core/error.hpp"

namespace sidefield::extraction {

ReconConfig ReconConfig::desk() { return ReconConfig{}; }

ReconConfig ReconConfig::paper() {
  ReconConfig c;
  c.resolution = 256;
  return c;
}

nlohmann::json ReconConfig::to_json() const {
  return {{"resolution", resolution}, {"extent", extent}, {"colorize", colorize}, {"chunk", chunk}};
}

ReconConfig ReconConfig::from_json(const nlohmann::json& j, const ReconConfig& base) {
  if (!j.is_object()) throw ConfigError("reconstruction config must be an object");
  ReconConfig c = base;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "resolution") c.resolution = value.get<int>();
      else if (key == "extent") c.extent = value.get<double>();
      else if (key == "colorize") c.colorize = value.get<bool>();
      else if (key == "chunk") c.chunk = value.get<int>();
      else throw ConfigError("unknown reconstruction config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("reconstruction config: ") + e.what());
  }
  if (c.resolution < 8) throw ConfigError("marching-cubes resolution must be >= 8");
  if (c.extent < 1.0) throw ConfigError("reconstruction extent must be >= 1");
  if (c.chunk < 1) throw ConfigError("chunk must be >= 1");
  return c;
}

training::ImplicitField make_field(const training::FieldModel& model, const Image& input,
                                   const body::BodyParams& body, double yaw_deg) {
  const auto& ec = model.config().encoder;
  if (input.height != ec.input_size || input.width != ec.input_size || input.channels != ec.in_channels)
    throw ContractViolation("reconstruct: input must be " + std::to_string(ec.input_size) + "x" +
                            std::to_string(ec.input_size) + "x" + std::to_string(ec.in_channels));
  return training::ImplicitField(model, input,
                                 training::make_view_prior(training::body_in_view(body, yaw_deg), model.config()));
}

Reconstruction reconstruct(const training::ImplicitField& field, const ReconConfig& config) {
  const Vec3 lo = Vec3::Constant(-config.extent), hi = Vec3::Constant(config.extent);
  const OccupancyVolume vol = evaluate_grid(
      [&](std::span<const Vec3> p, std::span<double> out) { field.occupancy(p, out); }, config.resolution, lo, hi,
      config.chunk);
  ExtractedMesh ex = marching_cubes(vol, 0.5);
  Reconstruction r{std::move(ex.mesh), ex.empty};
  if (config.colorize && !r.empty)
    colorize(r.mesh, [&](std::span<const Vec3> p, std::span<Vec3> out) { field.color(p, out); }, config.chunk);
  return r;
}

Reconstruction reconstruct(const training::FieldModel& model, const Image& input, const body::BodyParams& body,
                           const ReconConfig& config, double yaw_deg) {
  return reconstruct(make_field(model, input, body, yaw_deg), config);
}

}  // namespace sidefield::extraction
