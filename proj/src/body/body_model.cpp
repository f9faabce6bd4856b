#include "sidefield/body/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sidefield/core/error.hpp"
#include "sidefield/extraction/marching_cubes.hpp"
#include "sidefield/geom/triangle.hpp"

namespace sidefield::body {

namespace {

constexpr double kPi = std::numbers::pi;

// Authoring frame: body faces +z, subject's left is +x, y up. Coordinates are
// recentred and scaled into scene units by to_scene().
constexpr double kSceneScale = 0.95;
constexpr double kSceneShiftY = -0.058;

Vec3 to_scene(double x, double y, double z) { return kSceneScale * Vec3(x, y - kSceneShiftY, z); }

struct Segment {
  Vec3 a;
  Vec3 b;
  double radius;
  double depth_scale;  // z squash of the cross-section
  int joint;           // bone this segment is skinned to
};

std::array<Vec3, kJointCount> rest_joints() {
  std::array<Vec3, kJointCount> j;
  j[kPelvis] = to_scene(0.0, -0.02, 0.0);
  j[kChest] = to_scene(0.0, 0.20, 0.0);
  j[kNeck] = to_scene(0.0, 0.50, 0.0);
  j[kHead] = to_scene(0.0, 0.60, 0.0);
  j[kLeftShoulder] = to_scene(0.17, 0.44, 0.0);
  j[kLeftElbow] = to_scene(0.33, 0.20, -0.01);
  j[kLeftWrist] = to_scene(0.46, -0.03, 0.0);
  j[kLeftHip] = to_scene(0.09, -0.10, 0.0);
  j[kLeftKnee] = to_scene(0.13, -0.48, 0.01);
  j[kLeftAnkle] = to_scene(0.15, -0.84, -0.01);
  auto mirror = [](const Vec3& v) { return Vec3(-v.x(), v.y(), v.z()); };
  j[kRightShoulder] = mirror(j[kLeftShoulder]);
  j[kRightElbow] = mirror(j[kLeftElbow]);
  j[kRightWrist] = mirror(j[kLeftWrist]);
  j[kRightHip] = mirror(j[kLeftHip]);
  j[kRightKnee] = mirror(j[kLeftKnee]);
  j[kRightAnkle] = mirror(j[kLeftAnkle]);
  return j;
}

std::array<int, kJointCount> joint_parents() {
  std::array<int, kJointCount> p{};
  p[kPelvis] = -1;
  p[kChest] = kPelvis;
  p[kNeck] = kChest;
  p[kHead] = kNeck;
  p[kLeftShoulder] = kChest;
  p[kLeftElbow] = kLeftShoulder;
  p[kLeftWrist] = kLeftElbow;
  p[kRightShoulder] = kChest;
  p[kRightElbow] = kRightShoulder;
  p[kRightWrist] = kRightElbow;
  p[kLeftHip] = kPelvis;
  p[kLeftKnee] = kLeftHip;
  p[kLeftAnkle] = kLeftKnee;
  p[kRightHip] = kPelvis;
  p[kRightKnee] = kRightHip;
  p[kRightAnkle] = kRightKnee;
  return p;
}

std::vector<Segment> body_segments(const std::array<Vec3, kJointCount>& j) {
  const double s = kSceneScale;
  std::vector<Segment> segs;
  segs.push_back({to_scene(0, -0.04, 0), to_scene(0, 0.20, 0), 0.135 * s, 0.75, kPelvis});
  segs.push_back({to_scene(0, 0.20, 0), to_scene(0, 0.40, 0), 0.15 * s, 0.7, kChest});
  segs.push_back({j[kLeftShoulder], j[kRightShoulder], 0.075 * s, 1.0, kChest});
  segs.push_back({to_scene(0, 0.44, 0), j[kHead], 0.05 * s, 1.0, kNeck});
  segs.push_back({to_scene(0, 0.64, 0.01), to_scene(0, 0.72, 0.01), 0.095 * s, 1.0, kHead});
  segs.push_back({j[kLeftHip], j[kRightHip], 0.11 * s, 0.8, kPelvis});
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const int sh = side == 0 ? kLeftShoulder : kRightShoulder;
    const int el = side == 0 ? kLeftElbow : kRightElbow;
    const int wr = side == 0 ? kLeftWrist : kRightWrist;
    const int hip = side == 0 ? kLeftHip : kRightHip;
    const int kn = side == 0 ? kLeftKnee : kRightKnee;
    const int an = side == 0 ? kLeftAnkle : kRightAnkle;
    segs.push_back({j[sh], j[el], 0.055 * s, 1.0, sh});
    segs.push_back({j[el], j[wr], 0.045 * s, 1.0, el});
    segs.push_back({j[wr], j[wr] + s * Vec3(sx * 0.04, -0.07, 0.0), 0.04 * s, 0.8, wr});
    segs.push_back({j[hip], j[kn], 0.08 * s, 1.0, hip});
    segs.push_back({j[kn], j[an], 0.055 * s, 1.0, kn});
    segs.push_back({j[an], j[an] + s * Vec3(sx * 0.01, -0.05, 0.11), 0.04 * s, 1.0, an});
  }
  return segs;
}

double segment_distance(const Vec3& p, const Segment& seg) {
  const Vec3 squash(1.0, 1.0, 1.0 / seg.depth_scale);
  const Vec3 ps = p.cwiseProduct(squash);
  const geom::ClosestPoint cp =
      geom::closest_point_on_segment(ps, seg.a.cwiseProduct(squash), seg.b.cwiseProduct(squash));
  return (std::sqrt(cp.distance_sq) - seg.radius) * seg.depth_scale;
}

// Polynomial smooth minimum.
double smooth_min(double a, double b, double k) {
  const double h = std::clamp(0.5 + 0.5 * (b - a) / k, 0.0, 1.0);
  return b + (a - b) * h - k * h * (1.0 - h);
}

constexpr double kBlend = 0.02;

double body_sdf(const Vec3& p, const std::vector<Segment>& segs) {
  double d = segment_distance(p, segs[0]);
  for (std::size_t i = 1; i < segs.size(); ++i) d = smooth_min(d, segment_distance(p, segs[i]), kBlend);
  return d;
}

Vec3 sdf_gradient(const Vec3& p, const std::vector<Segment>& segs) {
  constexpr double h = 1e-5;
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 a = p, b = p;
    a[k] += h;
    b[k] -= h;
    g[k] = (body_sdf(a, segs) - body_sdf(b, segs)) / (2.0 * h);
  }
  return g;
}

Matrix skinning_weights(const std::vector<Vec3>& verts, const std::vector<Segment>& segs) {
  constexpr double kTemperature = 0.015;
  constexpr double kPrune = 1e-3;
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(verts.size()), kJointCount);
  std::vector<double> d(segs.size());
  for (std::size_t v = 0; v < verts.size(); ++v) {
    double dmin = 1e300;
    for (std::size_t s = 0; s < segs.size(); ++s) {
      d[s] = segment_distance(verts[v], segs[s]);
      dmin = std::min(dmin, d[s]);
    }
    for (std::size_t s = 0; s < segs.size(); ++s)
      w(v, segs[s].joint) += std::exp(-(d[s] - dmin) / kTemperature);
    w.row(v) /= w.row(v).sum();
    for (int j = 0; j < kJointCount; ++j)
      if (w(v, j) < kPrune) w(v, j) = 0.0;
    w.row(v) /= w.row(v).sum();
  }
  return w;
}

// Hand-authored shape directions. Each returns a per-vertex offset; joints
// follow the same positional rule so the skeleton stays inside the surface.
using OffsetRule = Vec3 (*)(const Vec3& p, const Vec3& n);

bool in_arm(const Vec3& p) { return std::abs(p.x()) > 0.19 && p.y() > -0.2; }
bool in_leg(const Vec3& p) { return p.y() < -0.05; }

Vec3 rule_scale(const Vec3& p, const Vec3&) { return 0.03 * p; }
Vec3 rule_height(const Vec3& p, const Vec3&) { return Vec3(0.0, 0.04 * p.y(), 0.0); }
Vec3 rule_girth(const Vec3& p, const Vec3&) { return Vec3(0.03 * p.x(), 0.0, 0.05 * p.z()); }
Vec3 rule_shoulders(const Vec3& p, const Vec3&) {
  const double t = std::clamp((p.y() - 0.1) / 0.4, 0.0, 1.0);
  return Vec3(0.04 * t * (p.x() > 0 ? 1.0 : -1.0) * std::min(1.0, std::abs(p.x()) / 0.1), 0.0, 0.0);
}
Vec3 rule_hips(const Vec3& p, const Vec3&) {
  const double t = std::exp(-std::pow((p.y() + 0.05) / 0.15, 2));
  return Vec3(0.05 * t * p.x(), 0.0, 0.0);
}
Vec3 rule_arm_girth(const Vec3& p, const Vec3& n) { return in_arm(p) ? Vec3(0.012 * n) : Vec3::Zero(); }
Vec3 rule_leg_girth(const Vec3& p, const Vec3& n) {
  return in_leg(p) && !in_arm(p) ? Vec3(0.012 * n) : Vec3::Zero();
}
Vec3 rule_belly(const Vec3& p, const Vec3& n) {
  if (in_arm(p) || p.z() <= 0.0) return Vec3::Zero();
  const double t = std::exp(-std::pow((p.y() - 0.12) / 0.12, 2));
  return 0.025 * t * Vec3(0.0, 0.0, std::max(0.0, n.z()));
}
Vec3 rule_head(const Vec3& p, const Vec3&) {
  const Vec3 centre = to_scene(0.0, 0.68, 0.01);
  if (p.y() < centre.y() - 0.08) return Vec3::Zero();
  return 0.08 * (p - centre);
}
Vec3 rule_chest_depth(const Vec3& p, const Vec3&) {
  if (in_arm(p)) return Vec3::Zero();
  const double t = std::exp(-std::pow((p.y() - 0.3) / 0.12, 2));
  return Vec3(0.0, 0.0, 0.08 * t * p.z());
}

constexpr std::array<OffsetRule, kShapeDim> kRules = {
    rule_scale, rule_height, rule_girth, rule_shoulders, rule_hips,
    rule_arm_girth, rule_leg_girth, rule_belly, rule_head, rule_chest_depth,
};
// Rules that move the skeleton. Normal-based ones only change thickness.
constexpr std::array<bool, kShapeDim> kMovesJoints = {
    true, true, false, true, true, false, false, false, true, false,
};

BodyTemplate make_template() {
  BodyTemplate t;
  t.joints = rest_joints();
  t.parents = joint_parents();
  const std::vector<Segment> segs = body_segments(t.joints);

  constexpr int kResolution = 52;
  extraction::ScalarField field = [&](std::span<const Vec3> pts, std::span<double> out) {
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = -body_sdf(pts[i], segs);
  };
  const extraction::OccupancyVolume vol =
      extraction::evaluate_grid(field, kResolution, Vec3::Constant(-1.0), Vec3::Constant(1.0));
  extraction::ExtractedMesh ex = extraction::marching_cubes(vol, 0.0);
  if (ex.empty) throw ContractViolation("body template: empty extraction");
  t.rest = std::move(ex.mesh);

  // Pull vertices onto the exact level set.
  for (Vec3& v : t.rest.vertices) {
    for (int it = 0; it < 3; ++it) {
      const double f = body_sdf(v, segs);
      const Vec3 g = sdf_gradient(v, segs);
      const double gg = g.squaredNorm();
      if (gg < 1e-12) break;
      v -= f * g / gg;
    }
  }
  const geom::TopologyReport topo = geom::check_topology(t.rest);
  if (!topo.closed() || !topo.consistent()) throw ContractViolation("body template: not closed");

  t.rest_normals = geom::vertex_normals(t.rest);
  t.skin_weights = skinning_weights(t.rest.vertices, segs);

  const auto n = static_cast<Eigen::Index>(t.rest.vertices.size());
  for (int k = 0; k < kShapeDim; ++k) {
    Matrix dir(n, 3);
    for (Eigen::Index v = 0; v < n; ++v) dir.row(v) = kRules[k](t.rest.vertices[v], t.rest_normals[v]).transpose();
    t.shape_dirs.push_back(std::move(dir));
    std::array<Vec3, kJointCount> jd;
    for (int j = 0; j < kJointCount; ++j)
      jd[j] = kMovesJoints[k] ? kRules[k](t.joints[j], Vec3::Zero()) : Vec3::Zero();
    t.joint_shape_dirs.push_back(jd);
  }
  return t;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ContractViolation(std::string("BodyParams: non-finite ") + what);
}

}  // namespace

Mat3 rodrigues(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(theta, axis_angle / theta).toRotationMatrix();
}

Vec3 canonicalize_axis_angle(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta <= kPi) return axis_angle;
  double wrapped = std::fmod(theta, 2.0 * kPi);
  if (wrapped > kPi) wrapped -= 2.0 * kPi;
  return axis_angle * (wrapped / theta);
}

BodyParams::BodyParams() : shape_(kShapeDim, 0.0), pose_(kJointCount, Vec3::Zero()) {}

BodyParams::BodyParams(std::vector<double> shape, std::vector<Vec3> pose)
    : shape_(std::move(shape)), pose_(std::move(pose)) {
  if (shape_.size() != kShapeDim)
    throw ContractViolation("BodyParams: shape must have " + std::to_string(kShapeDim) + " entries");
  if (pose_.size() != kJointCount)
    throw ContractViolation("BodyParams: pose must have " + std::to_string(kJointCount) + " joints");
  for (double s : shape_) check_finite(s, "shape");
  for (Vec3& r : pose_) {
    for (int k = 0; k < 3; ++k) check_finite(r[k], "pose");
    r = canonicalize_axis_angle(r);
  }
}

nlohmann::json BodyParams::to_json() const {
  nlohmann::json pose = nlohmann::json::array();
  for (const Vec3& r : pose_) pose.push_back({r.x(), r.y(), r.z()});
  return {{"shape", shape_}, {"pose", pose}};
}

BodyParams BodyParams::from_json(const nlohmann::json& j) {
  try {
    std::vector<double> shape = j.at("shape").get<std::vector<double>>();
    std::vector<Vec3> pose;
    for (const auto& r : j.at("pose")) {
      const auto v = r.get<std::vector<double>>();
      if (v.size() != 3) throw ContractViolation("BodyParams: pose entries must have 3 values");
      pose.emplace_back(v[0], v[1], v[2]);
    }
    return BodyParams(std::move(shape), std::move(pose));
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("BodyParams: malformed JSON: ") + e.what());
  }
}

const BodyTemplate& body_template() {
  static const BodyTemplate t = make_template();
  return t;
}

BodyMesh build_body(const BodyParams& params) {
  const BodyTemplate& t = body_template();
  const auto n = static_cast<Eigen::Index>(t.rest.vertices.size());

  std::vector<Vec3> shaped = t.rest.vertices;
  std::array<Vec3, kJointCount> joints = t.joints;
  for (int k = 0; k < kShapeDim; ++k) {
    const double beta = params.shape()[k];
    if (beta == 0.0) continue;
    for (Eigen::Index v = 0; v < n; ++v) shaped[v] += beta * t.shape_dirs[k].row(v).transpose();
    for (int j = 0; j < kJointCount; ++j) joints[j] += beta * t.joint_shape_dirs[k][j];
  }

  // Global transforms x -> R_j x + t_j, composed from rotations about each
  // joint. Identity rotations leave t_j exactly zero.
  std::array<Mat3, kJointCount> rot;
  std::array<Vec3, kJointCount> trans;
  std::array<Vec3, kJointCount> posed;
  for (int j = 0; j < kJointCount; ++j) {
    const Mat3 local = rodrigues(params.pose()[j]);
    const Vec3 local_t = joints[j] - local * joints[j];
    const int p = t.parents[j];
    if (p < 0) {
      rot[j] = local;
      trans[j] = local_t;
    } else {
      rot[j] = rot[p] * local;
      trans[j] = rot[p] * local_t + trans[p];
    }
    posed[j] = rot[j] * joints[j] + trans[j];
  }
  // Written as v + sum_j w_j ((R_j - I) v + t_j) so the identity pose is exact.
  std::array<Mat3, kJointCount> delta;
  for (int j = 0; j < kJointCount; ++j) delta[j] = rot[j] - Mat3::Identity();

  BodyMesh out;
  out.mesh.faces = t.rest.faces;
  out.mesh.vertices.resize(shaped.size());
  for (Eigen::Index v = 0; v < n; ++v) {
    Vec3 offset = Vec3::Zero();
    for (int j = 0; j < kJointCount; ++j) {
      const double w = t.skin_weights(v, j);
      if (w == 0.0) continue;
      offset += w * (delta[j] * shaped[v] + trans[j]);
    }
    out.mesh.vertices[v] = shaped[v] + offset;
  }
  out.skin_weights = t.skin_weights;
  out.rest_positions = std::move(shaped);
  out.joints = posed;
  return out;
}

BodyParams perturb_params(const BodyParams& params, double scale, const std::function<double()>& uniform) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ContractViolation("perturb_params: scale must be >= 0");
  std::vector<double> shape = params.shape();
  std::vector<Vec3> pose = params.pose();
  for (double& s : shape) s += (uniform() - 0.5) * 2.0 * scale;
  for (Vec3& r : pose)
    for (int k = 0; k < 3; ++k) r[k] += (uniform() - 0.5) * 2.0 * scale;
  return BodyParams(std::move(shape), std::move(pose));
}

BodyParams perturb_params(const BodyParams& params, double scale, Rng& rng) {
  return perturb_params(params, scale, [&rng] { return rng.uniform(); });
}

}  // namespace sidefield::body
