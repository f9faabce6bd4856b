#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "sidefield/body/body_model.hpp"
#include "sidefield/core/image.hpp"
#include "sidefield/geom/camera.hpp"
#include "sidefield/geom/mesh.hpp"

namespace sidefield::data {

struct ScanConfig {
  double clothing_amplitude = 0.08;  // maximum outward displacement
  double shape_range = 1.0;          // shape coefficients uniform in [-r, r]
  double pose_range = 0.12;          // non-root joint rotations, radians per component
  int views = 36;
  int resolution = 64;
  double scan_scale_cm = 100.0;      // centimetres per scene unit

  static ScanConfig desk();
  static ScanConfig paper();  // 512 px renders
  nlohmann::json to_json() const;
  static ScanConfig from_json(const nlohmann::json& j, const ScanConfig& base);
};

/// Clothed ground-truth subject: the displaced body surface with per-vertex
/// colors, the exact body parameters underneath and the render cameras.
struct SyntheticScan {
  geom::TriMesh mesh;
  body::BodyParams body;
  std::vector<geom::Camera> cameras;
  double scan_scale_cm = 100.0;
};

/// Deterministic per seed. Throws ContractViolation if the result leaves the
/// scene cube.
SyntheticScan generate_scan(const ScanConfig& config, std::uint64_t seed);

/// Scans for subject i use seed Rng::derive(seed, i).
std::vector<SyntheticScan> generate_dataset(const ScanConfig& config, int subjects, std::uint64_t seed);

/// Network input for one view: RGB render, clothed front normals and
/// front-aligned clothed back normals, each quantized to 8 bits (9 channels).
Image render_view_input(const geom::TriMesh& scan, const geom::Camera& camera);

/// Splits a 9-channel input into its RGB, front-normal and back-normal parts and back.
std::array<Image, 3> split_view_input(const Image& input);
Image merge_view_input(const Image& rgb, const Image& front_normals, const Image& back_normals);

}  // namespace sidefield::data
