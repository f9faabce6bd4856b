#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "sidefield/body/normal_render.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/eval/metrics.hpp"
#include "sidefield/geom/camera.hpp"

using namespace sidefield;

namespace {

// Mean over area samples (same stream as the library) of brute-force distances.
double brute_mean_distance(const geom::TriMesh& from, const geom::TriMesh& to, int n, std::uint64_t seed) {
  Rng rng(seed);
  const geom::AreaSampler sampler(from);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = oracle::nearest_face(to, sampler.sample(rng).point).closest.dist;
    sum += d <= 1e-12 ? 0.0 : d;
  }
  return sum / n;
}

geom::TriMesh colored(geom::TriMesh m, const Vec3& c) {
  m.colors.assign(m.vertices.size(), c);
  return m;
}

}  // namespace

TEST_CASE("chamfer and p2s") {
  const auto cube = geom::make_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  const auto shifted = geom::make_box(Vec3(-0.4, -0.5, -0.5), Vec3(0.6, 0.5, 0.5));
  SUBCASE("identity is exactly zero") {
    CHECK(eval::chamfer(cube, cube, 2000, 1) == 0.0);
    CHECK(eval::p2s(cube, cube, 2000, 1) == 0.0);
    const auto sphere = geom::make_icosphere(3, 0.7);
    CHECK(eval::chamfer(sphere, sphere, 2000, 4) == 0.0);
  }
  SUBCASE("offset cubes match the brute-force distance oracle") {
    const std::uint64_t sa = 11, sb = 12;
    const double want = 0.5 * (brute_mean_distance(cube, shifted, 1000, sa) + brute_mean_distance(shifted, cube, 1000, sb));
    CHECK(std::abs(eval::chamfer(cube, shifted, 1000, sa, sb) - want) <= 1e-9);
    CHECK(std::abs(eval::p2s(shifted, cube, 1000, 5) - brute_mean_distance(cube, shifted, 1000, Rng::derive(5, 1))) <= 1e-9);
  }
  SUBCASE("symmetric under mirrored seeds and consistent with the one-sided means") {
    const auto sphere = geom::make_icosphere(2, 0.6, Vec3(0.1, 0.0, 0.0));
    CHECK(eval::chamfer(cube, sphere, 500, 3, 4) == eval::chamfer(sphere, cube, 500, 4, 3));
    Rng ra(3), rb(4);
    const double ab = eval::mean_surface_distance(cube, sphere, 500, ra);
    const double ba = eval::mean_surface_distance(sphere, cube, 500, rb);
    CHECK(eval::chamfer(cube, sphere, 500, 3, 4) == 0.5 * (ab + ba));
    CHECK(ab >= 0.0);
  }
  SUBCASE("concentric spheres") {
    const auto gt = geom::make_icosphere(4, 1.0);
    const auto recon = geom::make_icosphere(4, 1.1);
    CHECK(eval::p2s(recon, gt, 4000, 9) == doctest::Approx(0.1).epsilon(0.03));
  }
  SUBCASE("contracts") {
    CHECK_THROWS_AS(eval::chamfer(cube, geom::TriMesh{}, 10, 1), ContractViolation);
    CHECK_THROWS_AS(eval::p2s(cube, cube, 0, 1), ContractViolation);
  }
}

TEST_CASE("normal error") {
  const auto sphere = geom::make_icosphere(3, 0.6);
  const std::vector<double> yaws = {0, 90, 180, 270};
  CHECK(eval::normal_error(sphere, sphere, yaws, 48) == 0.0);
  SUBCASE("flipped normals match the straight-line oracle") {
    auto flipped = sphere;
    geom::flip_winding(flipped);
    double total = 0.0;
    for (double yaw : yaws) {
      const auto img = body::render_normal_map(sphere, geom::Camera{yaw, 1.0, 0.0, 0.0, 48});
      double sum = 0.0;
      int count = 0;
      for (std::size_t p = 0; p < img.mask.size(); ++p) {
        if (!img.mask[p]) continue;
        double sq = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double n = 2.0 * img.pixels.data[3 * p + c] - 1.0;  // encoded difference is |n - (-n)| / 2 * 2
          sq += n * n;
        }
        sum += std::sqrt(sq);
        ++count;
      }
      total += sum / count;
    }
    CHECK(std::abs(eval::normal_error(sphere, flipped, yaws, 48) - total / 4) <= 1e-9);
  }
  SUBCASE("uncovered pixels count with the full encoded difference") {
    const auto small = geom::make_icosphere(3, 0.3);
    const auto views = eval::normal_error_views(sphere, small, {0.0}, 48);
    REQUIRE(views.size() == 1);
    CHECK(views[0].value > 0.5);
    const auto both = body::render_normal_map(sphere, geom::Camera{0.0, 1.0, 0.0, 0.0, 48});
    int covered = 0;
    for (char m : both.mask) covered += m;
    CHECK(views[0].pixels == covered);
  }
  SUBCASE("invariant to a common yaw offset") {
    geom::TriMesh a = geom::make_box(Vec3(-0.3, -0.5, -0.2), Vec3(0.3, 0.5, 0.2));
    geom::TriMesh b = geom::make_icosphere(2, 0.45);
    const double offset = 30.0;
    const Mat3 r = geom::yaw_rotation(-offset);
    const auto ar = geom::transformed(a, r, Vec3::Zero());
    const auto br = geom::transformed(b, r, Vec3::Zero());
    std::vector<double> shifted;
    for (double y : yaws) shifted.push_back(y + offset);
    CHECK(eval::normal_error(ar, br, shifted, 64) == doctest::Approx(eval::normal_error(a, b, yaws, 64)).epsilon(1e-3));
  }
}

TEST_CASE("psnr") {
  Image a(8, 8, 3, 0.5), b(8, 8, 3, 0.5 + 1.0 / 255.0);
  CHECK(std::abs(eval::psnr(a, b) - 48.1308) <= 1e-3);
  CHECK(std::abs(eval::psnr(a, b) - 20.0 * std::log10(255.0)) <= 1e-9);
  CHECK(eval::psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(eval::metric_value(eval::psnr(a, a)) == "inf");
  CHECK(eval::metric_value(2.5) == 2.5);
  std::vector<char> mask(64, 0);
  mask[3] = 1;
  b.at(0, 3, 0) = 0.5;
  b.at(0, 3, 1) = 0.5;
  b.at(0, 3, 2) = 0.5;
  CHECK(eval::psnr(a, b, &mask) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(eval::psnr(a, Image(4, 4, 3)), ContractViolation);
}

TEST_CASE("metric report") {
  const auto m = colored(geom::make_icosphere(2, 0.5), Vec3(0.3, 0.6, 0.2));
  auto cfg = eval::EvalConfig::desk();
  cfg.samples = 500;
  const auto r = eval::evaluate(m, m, cfg);
  CHECK(r.chamfer == 0.0);
  CHECK(r.p2s == 0.0);
  CHECK(r.normal_error == 0.0);
  REQUIRE(r.psnr.has_value());
  CHECK(std::isinf(*r.psnr));
  const auto j = r.to_json();
  CHECK(j["psnr"] == "inf");
  CHECK(j["chamfer_cm"] == 0.0);
  CHECK(j["normal_views"].size() == 4);
  CHECK(j["config"]["samples"] == 500);

  const auto other = colored(geom::make_icosphere(2, 0.55), Vec3(0.3, 0.5, 0.2));
  const auto r2 = eval::evaluate(other, m, cfg);
  CHECK(r2.chamfer > 0.0);
  CHECK(r2.to_json()["chamfer_cm"].get<double>() == doctest::Approx(100.0 * r2.chamfer));
  CHECK(*r2.psnr < 40.0);
  CHECK(eval::EvalConfig::paper().samples == 100000);
  CHECK_THROWS_AS(eval::EvalConfig::from_json({{"samples", 0}}, cfg), ConfigError);
}
