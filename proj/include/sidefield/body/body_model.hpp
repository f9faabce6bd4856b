#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidefield/core/rng.hpp"
#include "sidefield/core/types.hpp"
#include "sidefield/geom/mesh.hpp"

namespace sidefield::body {

inline constexpr int kJointCount = 16;
inline constexpr int kShapeDim = 10;

enum Joint : int {
  kPelvis, kChest, kNeck, kHead,
  kLeftShoulder, kLeftElbow, kLeftWrist,
  kRightShoulder, kRightElbow, kRightWrist,
  kLeftHip, kLeftKnee, kLeftAnkle,
  kRightHip, kRightKnee, kRightAnkle,
};

/// Rotation matrix for an axis-angle vector.
Mat3 rodrigues(const Vec3& axis_angle);

/// Maps an axis-angle vector to the equivalent one with magnitude <= pi.
Vec3 canonicalize_axis_angle(const Vec3& axis_angle);

/// Shape coefficients and per-joint axis-angle rotations of the body proxy.
class BodyParams {
 public:
  BodyParams();
  /// Throws ContractViolation on wrong sizes or non-finite values.
  BodyParams(std::vector<double> shape, std::vector<Vec3> pose);

  const std::vector<double>& shape() const { return shape_; }
  const std::vector<Vec3>& pose() const { return pose_; }

  nlohmann::json to_json() const;
  static BodyParams from_json(const nlohmann::json& j);

  bool operator==(const BodyParams& o) const { return shape_ == o.shape_ && pose_ == o.pose_; }

 private:
  std::vector<double> shape_;
  std::vector<Vec3> pose_;
};

/// Rest-pose template: a smooth union of capsules meshed once, with skinning
/// weights and hand-authored shape directions.
struct BodyTemplate {
  geom::TriMesh rest;
  std::vector<Vec3> rest_normals;
  std::array<Vec3, kJointCount> joints;
  std::array<int, kJointCount> parents;
  Matrix skin_weights;                                   // N x J, rows sum to 1
  std::vector<Matrix> shape_dirs;                        // kShapeDim of N x 3
  std::vector<std::array<Vec3, kJointCount>> joint_shape_dirs;
};

/// Built on first use; deterministic and immutable afterwards.
const BodyTemplate& body_template();

struct BodyMesh {
  geom::TriMesh mesh;
  Matrix skin_weights;
  std::vector<Vec3> rest_positions;       // shaped, unposed
  std::array<Vec3, kJointCount> joints;   // posed joint positions
};

/// Shape offsets followed by linear blend skinning.
BodyMesh build_body(const BodyParams& params);

/// Adds (u - 0.5) * 2 * scale to every shape and pose component, with u drawn
/// from `uniform` in [0, 1). Shape components are drawn first, then pose in
/// joint-major order.
BodyParams perturb_params(const BodyParams& params, double scale, const std::function<double()>& uniform);
BodyParams perturb_params(const BodyParams& params, double scale, Rng& rng);

}  // namespace sidefield::body
