#pragma once

#include "json.hpp"
#include "sidefield/body/body_model.hpp"
#include "sidefield/core/image.hpp"
#include "sidefield/extraction/marching_cubes.hpp"
#include "sidefield/training/field_model.hpp"

namespace sidefield::extraction {

struct ReconConfig {
  int resolution = 64;  // marching-cubes lattice nodes per axis
  double extent = 1.0;  // lattice spans [-extent, extent]^3
  bool colorize = true;
  int chunk = 4096;

  static ReconConfig desk();
  static ReconConfig paper();  // 256
  nlohmann::json to_json() const;
  static ReconConfig from_json(const nlohmann::json& j, const ReconConfig& base);
};

struct Reconstruction {
  geom::TriMesh mesh;  // in the input view frame
  bool empty = true;
};

/// Field for one input image: encoder planes from the 9-channel input and the
/// body prior for `body` seen from a camera with yaw `yaw_deg`.
training::ImplicitField make_field(const training::FieldModel& model, const Image& input,
                                   const body::BodyParams& body, double yaw_deg = 0.0);

/// Dense occupancy grid, 0.5 iso-surface, then per-vertex field colors.
Reconstruction reconstruct(const training::ImplicitField& field, const ReconConfig& config);
Reconstruction reconstruct(const training::FieldModel& model, const Image& input, const body::BodyParams& body,
                           const ReconConfig& config, double yaw_deg = 0.0);

}  // namespace sidefield::extraction
