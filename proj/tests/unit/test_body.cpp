#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "sidefield/body/body_model.hpp"
#include "sidefield/body/normal_render.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/core/rng.hpp"
#include "sidefield/geom/raster.hpp"

using namespace sidefield;
using body::BodyParams;

namespace {

BodyParams random_params(Rng& rng, double pose_scale) {
  std::vector<double> shape(body::kShapeDim);
  for (double& s : shape) s = rng.uniform(-1.0, 1.0);
  std::vector<Vec3> pose(body::kJointCount);
  for (Vec3& r : pose) r = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)) * pose_scale;
  return BodyParams(shape, pose);
}

// Independent forward kinematics + per-vertex blend.
std::vector<Vec3> brute_lbs(const BodyParams& p) {
  const auto& t = body::body_template();
  const std::size_t n = t.rest.vertices.size();
  std::vector<Vec3> v(n);
  std::array<Vec3, body::kJointCount> j_rest;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = t.rest.vertices[i];
    for (int k = 0; k < body::kShapeDim; ++k) v[i] += p.shape()[k] * t.shape_dirs[k].row(i).transpose();
  }
  for (int j = 0; j < body::kJointCount; ++j) {
    j_rest[j] = t.joints[j];
    for (int k = 0; k < body::kShapeDim; ++k) j_rest[j] += p.shape()[k] * t.joint_shape_dirs[k][j];
  }
  std::array<Mat3, body::kJointCount> R;
  std::array<Vec3, body::kJointCount> j_posed;
  for (int j = 0; j < body::kJointCount; ++j) {
    const int par = t.parents[j];
    if (par < 0) {
      R[j] = oracle::axis_angle(p.pose()[j]);
      j_posed[j] = j_rest[j];
    } else {
      R[j] = R[par] * oracle::axis_angle(p.pose()[j]);
      j_posed[j] = j_posed[par] + R[par] * (j_rest[j] - j_rest[par]);
    }
  }
  std::vector<Vec3> out(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < body::kJointCount; ++j)
      out[i] += t.skin_weights(i, j) * (R[j] * (v[i] - j_rest[j]) + j_posed[j]);
  return out;
}

double max_diff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("body template is closed, consistently wound and properly skinned") {
  const auto& t = body::body_template();
  CHECK(t.rest.vertices.size() > 1000);
  CHECK(t.rest.vertices.size() < 4000);
  const auto topo = geom::check_topology(t.rest);
  CHECK(topo.closed());
  CHECK(topo.consistent());
  CHECK(geom::signed_volume(t.rest) > 0.0);
  for (Eigen::Index v = 0; v < t.skin_weights.rows(); ++v) {
    CHECK(t.skin_weights.row(v).minCoeff() >= 0.0);
    CHECK(std::abs(t.skin_weights.row(v).sum() - 1.0) <= 1e-6);
  }
  CHECK(t.shape_dirs.size() == static_cast<std::size_t>(body::kShapeDim));
}

TEST_CASE("build_body with zero parameters returns the rest template exactly") {
  const auto m = body::build_body(BodyParams());
  CHECK(m.mesh.vertices == body::body_template().rest.vertices);
  CHECK(m.mesh.faces == body::body_template().rest.faces);
}

TEST_CASE("build_body root rotation of pi about the vertical axis is rigid") {
  std::vector<Vec3> pose(body::kJointCount, Vec3::Zero());
  pose[body::kPelvis] = Vec3(0, std::numbers::pi, 0);
  const auto m = body::build_body(BodyParams(std::vector<double>(body::kShapeDim, 0.0), pose));
  const auto& rest = body::body_template().rest.vertices;
  const Vec3 root = body::body_template().joints[body::kPelvis];
  std::vector<Vec3> expected;
  for (const Vec3& v : rest) expected.push_back(oracle::rot_y(180.0) * (v - root) + root);
  CHECK(max_diff(m.mesh.vertices, expected) <= 1e-9);
}

TEST_CASE("build_body matches brute-force per-vertex skinning") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const BodyParams p = random_params(rng, 0.6);
    const auto m = body::build_body(p);
    CHECK(max_diff(m.mesh.vertices, brute_lbs(p)) <= 1e-9);
    const auto topo = geom::check_topology(m.mesh);
    CHECK(topo.closed());
    CHECK(topo.consistent());
  }
}

TEST_CASE("build_body is equivariant to a global root rotation") {
  Rng rng(5);
  const BodyParams p = random_params(rng, 0.4);
  const Mat3 Q = oracle::axis_angle(Vec3(0.3, -1.1, 0.4));
  std::vector<Vec3> pose = p.pose();
  const Eigen::AngleAxisd composed(Q * oracle::axis_angle(pose[0]));
  pose[0] = composed.angle() * composed.axis();
  const auto a = body::build_body(p);
  const auto b = body::build_body(BodyParams(p.shape(), pose));
  const Vec3 root = a.joints[body::kPelvis];
  std::vector<Vec3> expected;
  for (const Vec3& v : a.mesh.vertices) expected.push_back(Q * (v - root) + root);
  CHECK(max_diff(b.mesh.vertices, expected) <= 1e-9);
}

TEST_CASE("BodyParams validates, canonicalizes and round-trips through JSON") {
  CHECK_THROWS_AS(BodyParams(std::vector<double>(3, 0.0), std::vector<Vec3>(body::kJointCount, Vec3::Zero())),
                  ContractViolation);
  CHECK_THROWS_AS(BodyParams(std::vector<double>(body::kShapeDim, 0.0), std::vector<Vec3>(2, Vec3::Zero())),
                  ContractViolation);
  std::vector<double> bad(body::kShapeDim, 0.0);
  bad[2] = std::nan("");
  CHECK_THROWS_AS(BodyParams(bad, std::vector<Vec3>(body::kJointCount, Vec3::Zero())), ContractViolation);

  std::vector<Vec3> pose(body::kJointCount, Vec3::Zero());
  pose[3] = Vec3(0, 0, 1.5 * std::numbers::pi);
  pose[4] = Vec3(4.0, 3.0, 0.0);  // magnitude 5
  const BodyParams p(std::vector<double>(body::kShapeDim, 0.25), pose);
  for (int j = 0; j < body::kJointCount; ++j) {
    CHECK(p.pose()[j].norm() <= std::numbers::pi + 1e-12);
    CHECK((oracle::axis_angle(p.pose()[j]) - oracle::axis_angle(pose[j])).cwiseAbs().maxCoeff() <= 1e-12);
  }
  const BodyParams q = BodyParams::from_json(nlohmann::json::parse(p.to_json().dump()));
  CHECK(q == p);
  CHECK(p.to_json()["pose"].size() == static_cast<std::size_t>(body::kJointCount));
  CHECK_THROWS_AS(BodyParams::from_json(nlohmann::json::parse(R"({"shape":[1,2]})")), ContractViolation);
  CHECK_THROWS_AS(BodyParams::from_json(nlohmann::json::parse(R"({"shape":"x","pose":[]})")), ContractViolation);
}

TEST_CASE("perturb_params noise model") {
  Rng rng(3);
  const BodyParams p = random_params(rng, 0.5);
  SUBCASE("u = 0.5 gives the input exactly") {
    CHECK(body::perturb_params(p, 0.3, [] { return 0.5; }) == p);
  }
  SUBCASE("scale 0 is the identity") {
    Rng r(1);
    CHECK(body::perturb_params(p, 0.0, r) == p);
  }
  SUBCASE("robustness scale 0.05 bounds every component and hits the extremes") {
    const double s = 0.05;
    const BodyParams lo = body::perturb_params(p, s, [] { return 0.0; });
    CHECK(lo.shape()[0] == doctest::Approx(p.shape()[0] - s).epsilon(1e-12));
    Rng r(9);
    for (int trial = 0; trial < 20; ++trial) {
      const BodyParams q = body::perturb_params(p, s, r);
      for (int k = 0; k < body::kShapeDim; ++k) CHECK(std::abs(q.shape()[k] - p.shape()[k]) <= s);
      for (int j = 0; j < body::kJointCount; ++j) CHECK((q.pose()[j] - p.pose()[j]).cwiseAbs().maxCoeff() <= s + 1e-15);
    }
  }
  SUBCASE("input is untouched and negative scale is rejected") {
    const BodyParams copy = p;
    Rng r(2);
    (void)body::perturb_params(p, 0.1, r);
    CHECK(copy == p);
    CHECK_THROWS_AS(body::perturb_params(p, -1.0, r), ContractViolation);
  }
}

TEST_CASE("normal map of a fronto-parallel triangle") {
  geom::TriMesh tri;
  tri.vertices = {Vec3(-0.8, -0.8, 0.1), Vec3(0.8, -0.8, 0.1), Vec3(0.0, 0.8, 0.1)};
  tri.faces = {Face{0, 1, 2}};
  const auto img = body::render_normal_map(tri, geom::Camera{0.0, 1.0, 0.0, 0.0, 32});
  CHECK_FALSE(img.empty);
  int covered = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      if (!img.mask[y * 32 + x]) {
        CHECK(img.pixels.at(y, x, 0) == 0.0);
        CHECK(img.pixels.at(y, x, 2) == 0.0);
        continue;
      }
      ++covered;
      CHECK(img.pixels.at(y, x, 0) == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(img.pixels.at(y, x, 1) == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(img.pixels.at(y, x, 2) == doctest::Approx(1.0).epsilon(1e-12));
    }
  CHECK(covered > 100);
}

TEST_CASE("normal map of a symmetric mesh seen from behind is the mirrored front view") {
  const auto sphere = geom::make_icosphere(2, 0.7);
  const int res = 48;
  const auto front = body::render_normal_map(sphere, geom::Camera{0.0, 1.0, 0.0, 0.0, res});
  const auto back = body::render_normal_map(sphere, geom::Camera{180.0, 1.0, 0.0, 0.0, res});
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const int xm = res - 1 - x;
      REQUIRE(front.mask[y * res + x] == back.mask[y * res + xm]);
      if (!front.mask[y * res + x]) continue;
      const Vec3 a = body::decode_normal(front.pixels, y, x);
      const Vec3 b = body::decode_normal(back.pixels, y, xm);
      CHECK(std::abs(a.x() + b.x()) <= 1e-9);
      CHECK(std::abs(a.y() - b.y()) <= 1e-9);
      CHECK(std::abs(a.z() - b.z()) <= 1e-9);
    }
}

TEST_CASE("normal map of an icosphere follows the analytic sphere normal") {
  const auto sphere = geom::make_icosphere(4, 0.8);
  for (double yaw : {0.0, 37.0, 90.0, 211.0}) {
    const geom::Camera cam{yaw, 1.0, 0.0, 0.0, 64};
    const auto img = body::render_normal_map(sphere, cam);
    const auto buf = geom::rasterize(sphere.vertices, sphere.faces, cam);
    double worst = 0;
    int silhouette_mismatch = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const std::size_t idx = y * 64 + x;
        // Silhouette oracle: pixel centre inside any projected triangle.
        const double X = oracle::pixel_x(x, 64), Y = oracle::pixel_y(y, 64);
        bool covered = false;
        for (const Face& f : sphere.faces) {
          Eigen::Vector2d p[3];
          for (int k = 0; k < 3; ++k) {
            const Vec3 v = oracle::rot_y(yaw) * sphere.vertices[f[k]];
            p[k] = Eigen::Vector2d(v.x(), v.y());
          }
          auto cross = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, double px, double py) {
            return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
          };
          const double c0 = cross(p[0], p[1], X, Y), c1 = cross(p[1], p[2], X, Y), c2 = cross(p[2], p[0], X, Y);
          if ((c0 >= 0 && c1 >= 0 && c2 >= 0) || (c0 <= 0 && c1 <= 0 && c2 <= 0)) {
            covered = true;
            break;
          }
        }
        if (covered != static_cast<bool>(img.mask[idx])) ++silhouette_mismatch;
        if (!img.mask[idx]) {
          CHECK(img.pixels.at(y, x, 1) == 0.0);
          continue;
        }
        const Vec3 n = body::decode_normal(img.pixels, y, x);
        CHECK(std::abs(n.norm() - 1.0) <= 1e-3);
        const Face& f = sphere.faces[buf.face[idx]];
        const Vec3 hit = buf.bary[idx][0] * sphere.vertices[f[0]] + buf.bary[idx][1] * sphere.vertices[f[1]] +
                         buf.bary[idx][2] * sphere.vertices[f[2]];
        const Vec3 analytic = oracle::rot_y(yaw) * hit.normalized();
        worst = std::max(worst, std::acos(std::clamp(n.normalized().dot(analytic), -1.0, 1.0)));
      }
    CHECK(silhouette_mismatch == 0);
    CHECK(worst * 180.0 / std::numbers::pi < 2.0);
  }
}

TEST_CASE("normal map of a mesh outside the frame is empty") {
  const auto sphere = geom::make_icosphere(1, 0.3);
  const auto img = body::render_normal_map(sphere, geom::Camera{0.0, 1.0, 5.0, 0.0, 16});
  CHECK(img.empty);
  for (char m : img.mask) CHECK(m == 0);
  CHECK_THROWS_AS(body::render_normal_map(sphere, geom::Camera{0.0, -1.0, 0.0, 0.0, 16}), ContractViolation);
}
