#include "sidefield/data/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "sidefield/body/normal_render.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"
#include "sidefield/core/rng.hpp"
#include "sidefield/fusion/prior_fusion.hpp"
#include "sidefield/geom/shading.hpp"
#include "sidefield/geom/triangle.hpp"

namespace sidefield::data {

ScanConfig ScanConfig::desk() { return ScanConfig{}; }

ScanConfig ScanConfig::paper() {
  ScanConfig c;
  c.resolution = 512;
  return c;
}

nlohmann::json ScanConfig::to_json() const {
  return {{"clothing_amplitude", clothing_amplitude}, {"shape_range", shape_range},
          {"pose_range", pose_range},                 {"views", views},
          {"resolution", resolution},                 {"scan_scale_cm", scan_scale_cm}};
}

ScanConfig ScanConfig::from_json(const nlohmann::json& j, const ScanConfig& base) {
  if (!j.is_object()) throw ConfigError("scan config must be an object");
  ScanConfig c = base;
  for (const auto& [key, value] : j.items()) {
    if (key == "clothing_amplitude") c.clothing_amplitude = value.get<double>();
    else if (key == "shape_range") c.shape_range = value.get<double>();
    else if (key == "pose_range") c.pose_range = value.get<double>();
    else if (key == "views") c.views = value.get<int>();
    else if (key == "resolution") c.resolution = value.get<int>();
    else if (key == "scan_scale_cm") c.scan_scale_cm = value.get<double>();
    else throw ConfigError("unknown scan config key: " + key);
  }
  if (c.clothing_amplitude < 0 || c.clothing_amplitude > 0.08) throw ConfigError("clothing_amplitude must be in [0, 0.08]");
  if (c.shape_range < 0 || c.pose_range < 0) throw ConfigError("shape_range and pose_range must be >= 0");
  if (c.views < 1 || c.resolution < 8) throw ConfigError("views must be >= 1 and resolution >= 8");
  if (!(c.scan_scale_cm > 0)) throw ConfigError("scan_scale_cm must be positive");
  return c;
}

namespace {

Vec3 hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 1.0) * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  Vec3 rgb;
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  return rgb + Vec3::Constant(v - c);
}

enum class Region { kSkin, kHair, kShirt, kPants, kShoes };

Region region_of(int joint, const Vec3& rest, double head_y) {
  using namespace body;
  switch (joint) {
    case kHead:
      return rest.y() > head_y + 0.02 || rest.z() < -0.03 ? Region::kHair : Region::kSkin;
    case kNeck:
    case kLeftWrist:
    case kRightWrist:
      return Region::kSkin;
    case kLeftAnkle:
    case kRightAnkle:
      return Region::kShoes;
    case kPelvis:
    case kLeftHip:
    case kRightHip:
    case kLeftKnee:
    case kRightKnee:
      return Region::kPants;
    default:
      return Region::kShirt;
  }
}

// Smooth field in [-1, 1]: a normalized sum of random plane waves.
struct WaveField {
  std::vector<Vec3> k;
  std::vector<double> phase;

  WaveField(Rng& rng, int waves, double min_freq, double max_freq) {
    for (int i = 0; i < waves; ++i) {
      Vec3 d(rng.normal(), rng.normal(), rng.normal());
      if (d.norm() < 1e-9) d = Vec3::UnitX();
      k.push_back(d.normalized() * rng.uniform(min_freq, max_freq));
      phase.push_back(rng.uniform(0.0, 2.0 * M_PI));
    }
  }
  double operator()(const Vec3& p) const {
    double s = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) s += std::sin(k[i].dot(p) + phase[i]);
    return s / static_cast<double>(k.size());
  }
};

// Distance along the outward normal to the nearest face not touching the
// vertex; infinity if the ray escapes.
std::vector<double> normal_clearance(const geom::TriMesh& mesh, const std::vector<Vec3>& normals) {
  std::vector<double> out(mesh.vertices.size(), std::numeric_limits<double>::infinity());
  parallel::for_each_index(static_cast<std::int64_t>(mesh.vertices.size()), [&](std::int64_t vi) {
    const Vec3& o = mesh.vertices[vi];
    double best = std::numeric_limits<double>::infinity();
    for (const Face& f : mesh.faces) {
      if (f[0] == vi || f[1] == vi || f[2] == vi) continue;
      const auto hit = geom::intersect_ray_triangle(o, normals[vi], mesh.vertices[f[0]], mesh.vertices[f[1]],
                                                    mesh.vertices[f[2]]);
      if (hit.hit && hit.t > 0.0) best = std::min(best, hit.t);
    }
    out[vi] = best;
  });
  return out;
}

}  // namespace

SyntheticScan generate_scan(const ScanConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> shape(body::kShapeDim);
  for (double& s : shape) s = rng.uniform(-config.shape_range, config.shape_range);
  std::vector<Vec3> pose(body::kJointCount, Vec3::Zero());
  for (int j = 1; j < body::kJointCount; ++j)
    for (int a = 0; a < 3; ++a) pose[j][a] = rng.uniform(-config.pose_range, config.pose_range);

  SyntheticScan scan;
  scan.body = body::BodyParams(shape, pose);
  scan.scan_scale_cm = config.scan_scale_cm;
  const body::BodyMesh bm = body::build_body(scan.body);
  const auto& tpl = body::body_template();
  const double head_y = tpl.joints[body::kHead].y();

  // Palette and pattern.
  const Vec3 shirt = hsv(rng.uniform(), rng.uniform(0.35, 0.8), rng.uniform(0.45, 0.9));
  const Vec3 shirt_alt = hsv(rng.uniform(), rng.uniform(0.2, 0.6), rng.uniform(0.6, 0.95));
  const Vec3 pants = hsv(rng.uniform(), rng.uniform(0.2, 0.7), rng.uniform(0.2, 0.6));
  const Vec3 skin = hsv(rng.uniform(0.03, 0.1), rng.uniform(0.3, 0.6), rng.uniform(0.55, 0.9));
  const Vec3 hair = hsv(rng.uniform(0.0, 0.12), rng.uniform(0.3, 0.8), rng.uniform(0.08, 0.35));
  const Vec3 shoes = hsv(rng.uniform(), rng.uniform(0.0, 0.4), rng.uniform(0.1, 0.3));
  const double stripe_freq = rng.uniform(10.0, 20.0);
  const WaveField fold(rng, 8, 3.0, 9.0);
  const WaveField cloth(rng, 6, 2.0, 6.0);

  geom::TriMesh mesh = bm.mesh;
  const std::vector<Vec3> normals = geom::vertex_normals(mesh);
  const std::size_t n = mesh.vertices.size();
  std::vector<double> disp(n, 0.0);
  mesh.colors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int joint = 0;
    bm.skin_weights.row(static_cast<Eigen::Index>(i)).maxCoeff(&joint);
    const Vec3& rest = bm.rest_positions[i];
    const Vec3& p = mesh.vertices[i];
    const Region r = region_of(joint, rest, head_y);
    double looseness = 1.0;
    Vec3 c;
    switch (r) {
      case Region::kSkin:
        c = skin;
        looseness = 0.1;
        break;
      case Region::kHair:
        c = hair;
        looseness = 0.3;
        break;
      case Region::kShirt:
        c = std::sin(stripe_freq * rest.y()) > 0.3 ? shirt_alt : shirt;
        break;
      case Region::kPants:
        c = pants;
        looseness = 0.8;
        break;
      case Region::kShoes:
        c = shoes;
        looseness = 0.4;
        break;
    }
    c *= 0.9 + 0.1 * fold(p);
    mesh.colors[i] = c.cwiseMax(0.0).cwiseMin(1.0);
    disp[i] = config.clothing_amplitude * looseness * (0.5 + 0.5 * cloth(p));
  }

  if (config.clothing_amplitude > 0.0) {
    // Opposing surfaces may each move at most 45% of the gap between them.
    const std::vector<double> clearance = normal_clearance(mesh, normals);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::min(disp[i], 0.45 * clearance[i]);
      mesh.vertices[i] += d * normals[i];
    }
  }

  const auto [lo, hi] = geom::bounding_box(mesh);
  if (lo.minCoeff() < -0.99 || hi.maxCoeff() > 0.99)
    throw ContractViolation("generate_scan: subject leaves the scene cube; reduce shape or pose range");

  scan.mesh = std::move(mesh);
  for (int v = 0; v < config.views; ++v) {
    geom::Camera cam;
    cam.yaw_deg = 360.0 * v / config.views;
    cam.resolution = config.resolution;
    scan.cameras.push_back(cam);
  }
  return scan;
}

std::vector<SyntheticScan> generate_dataset(const ScanConfig& config, int subjects, std::uint64_t seed) {
  if (subjects < 1) throw ContractViolation("generate_dataset: need at least one subject");
  std::vector<SyntheticScan> out;
  for (int i = 0; i < subjects; ++i) out.push_back(generate_scan(config, Rng::derive(seed, i)));
  return out;
}

Image render_view_input(const geom::TriMesh& scan, const geom::Camera& camera) {
  Image rgb = geom::render_vertex_colors(scan, camera);
  Image front = body::render_normal_map(scan, camera).pixels;
  geom::Camera back_cam = camera;
  back_cam.yaw_deg = camera.yaw_deg + 180.0;
  Image back = fusion::mirror_horizontal(body::render_normal_map(scan, back_cam).pixels);
  Image out = merge_view_input(rgb, front, back);
  quantize_8bit(out);
  return out;
}

std::array<Image, 3> split_view_input(const Image& input) {
  if (input.channels != 9) throw ContractViolation("split_view_input: expected 9 channels");
  std::array<Image, 3> parts;
  for (int k = 0; k < 3; ++k) {
    parts[k] = Image(input.height, input.width, 3);
    for (int y = 0; y < input.height; ++y)
      for (int x = 0; x < input.width; ++x)
        for (int c = 0; c < 3; ++c) parts[k].at(y, x, c) = input.at(y, x, 3 * k + c);
  }
  return parts;
}

Image merge_view_input(const Image& rgb, const Image& front_normals, const Image& back_normals) {
  const std::array<const Image*, 3> parts = {&rgb, &front_normals, &back_normals};
  for (const Image* p : parts)
    if (p->channels != 3 || p->height != rgb.height || p->width != rgb.width)
      throw ContractViolation("merge_view_input: parts must be equally sized 3-channel images");
  Image out(rgb.height, rgb.width, 9);
  for (int k = 0; k < 3; ++k)
    for (int y = 0; y < rgb.height; ++y)
      for (int x = 0; x < rgb.width; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, x, 3 * k + c) = parts[k]->at(y, x, c);
  return out;
}

}  // namespace sidefield::data
