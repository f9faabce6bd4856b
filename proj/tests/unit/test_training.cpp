#include <cmath>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/extraction/reconstruct.hpp"
#include "sidefield/training/trainer.hpp"

using namespace sidefield;
using namespace sidefield::training;

namespace {

ModelConfig micro_model() {
  ModelConfig c;
  c.encoder.input_size = 8;
  c.encoder.patch = 4;
  c.encoder.width = 8;
  c.encoder.heads = 2;
  c.encoder.encoder_depth = 1;
  c.encoder.front_depth = 1;
  c.encoder.side_depth = 1;
  c.encoder.plane_size = 4;
  c.encoder.plane_channels = 2;
  c.encoder.init_std = 0.3;
  c.heads.hidden = {6, 4};
  c.heads.init_std = 0.3;
  return c;
}

const data::SyntheticScan& small_scan() {
  static const data::SyntheticScan scan = [] {
    auto c = data::ScanConfig::desk();
    c.resolution = 8;
    return data::generate_scan(c, 21);
  }();
  return scan;
}

Matrix random_probs(Rng& rng, int r, int c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.01, 0.99);
  return m;
}

}  // namespace

TEST_CASE("occupancy labels") {
  const auto cube = geom::make_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  const geom::SurfaceIndex cube_index(cube);
  CHECK(occupancy_label(cube_index, Vec3::Zero()) == 1.0);
  CHECK(occupancy_label(cube_index, Vec3(0.9, 0.0, 0.0)) == 0.0);
  CHECK(occupancy_label(cube_index, Vec3(0.5, 0.1, 0.2)) == 1.0);  // on the surface
  const auto& scan = small_scan();
  const geom::SurfaceIndex index(scan.mesh);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(rng.uniform(-0.6, 0.6), rng.uniform(-0.95, 0.95), rng.uniform(-0.3, 0.3));
    CHECK(occupancy_label(index, p) == (oracle::signed_distance(scan.mesh, p) <= 0.0 ? 1.0 : 0.0));
  }
  CHECK_THROWS_AS(occupancy_label(index, Vec3(NAN, 0, 0)), ContractViolation);
}

TEST_CASE("occupancy point sampling") {
  const auto& scan = small_scan();
  const geom::SurfaceIndex index(scan.mesh);
  SUBCASE("zero offset and no uniform share: every point is on the surface and inside") {
    SamplingConfig c;
    c.surface_sigma = 0.0;
    c.uniform_fraction = 0.0;
    Rng rng(2);
    const auto s = sample_occupancy_points(scan.mesh, index, 300, c, rng);
    REQUIRE(s.points.size() == 300);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      CHECK(index.unsigned_distance(s.points[i]) <= 1e-12);
      CHECK(s.labels(i, 0) == 1.0);
    }
  }
  SUBCASE("labels match the parity oracle; uniform share fills the cube") {
    Rng rng(3);
    const SamplingConfig c;
    const auto s = sample_occupancy_points(scan.mesh, index, 512, c, rng);
    CHECK(s.labels.rows() == 512);
    int inside = 0;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      CHECK(s.labels(i, 0) == (oracle::inside(scan.mesh, s.points[i]) ? 1.0 : 0.0));
      inside += s.labels(i, 0) > 0.5;
    }
    CHECK(inside > 100);
    CHECK(inside < 412);
    // Last 32 points are the uniform share.
    double far = 0.0;
    for (std::size_t i = 480; i < 512; ++i) {
      CHECK(s.points[i].cwiseAbs().maxCoeff() <= 1.0);
      far = std::max(far, index.unsigned_distance(s.points[i]));
    }
    CHECK(far > 0.3);
  }
  SUBCASE("deterministic per seed") {
    Rng a(4), b(4);
    const auto s1 = sample_occupancy_points(scan.mesh, index, 64, SamplingConfig{}, a);
    const auto s2 = sample_occupancy_points(scan.mesh, index, 64, SamplingConfig{}, b);
    CHECK(s1.points == s2.points);
    CHECK(s1.labels == s2.labels);
  }
  Rng rng(5);
  CHECK_THROWS_AS(sample_occupancy_points(scan.mesh, index, 0, SamplingConfig{}, rng), ContractViolation);
}

TEST_CASE("color point sampling") {
  const auto& scan = small_scan();
  SUBCASE("zero offset labels match the closest-point color oracle") {
    Rng rng(6);
    const auto s = sample_color_points(scan.mesh, 1000, 0.0, rng);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto nf = oracle::nearest_face(scan.mesh, s.points[i]);
      CHECK(nf.closest.dist <= 1e-12);
      const Face& f = scan.mesh.faces[nf.face];
      const Vec3 want = nf.closest.bary[0] * scan.mesh.colors[f[0]] + nf.closest.bary[1] * scan.mesh.colors[f[1]] +
                        nf.closest.bary[2] * scan.mesh.colors[f[2]];
      CHECK((s.colors.row(i).transpose() - want).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
  SUBCASE("single triangle corner colors") {
    geom::TriMesh tri;
    tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    tri.faces = {Face{0, 1, 2}};
    const Vec3 c(0.2, 0.4, 0.6);
    tri.colors = {c, c, c};
    Rng rng(7);
    const auto s = sample_color_points(tri, 20, 0.0, rng);
    for (Eigen::Index i = 0; i < 20; ++i) CHECK((s.colors.row(i).transpose() - c).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("offsets follow the normal with the requested spread; labels stay valid colors") {
    geom::TriMesh tri;
    tri.vertices = {Vec3(-1, -1, 0), Vec3(1, -1, 0), Vec3(0, 1, 0)};
    tri.faces = {Face{0, 1, 2}};
    tri.colors = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    Rng rng(8);
    const double sigma = 0.01;
    const auto s = sample_color_points(tri, 4000, sigma, rng);
    double sum_sq = 0.0;
    for (const Vec3& p : s.points) sum_sq += p.z() * p.z();
    CHECK(std::sqrt(sum_sq / 4000) == doctest::Approx(sigma).epsilon(0.05));
    CHECK(s.colors.minCoeff() >= 0.0);
    CHECK(s.colors.maxCoeff() <= 1.0);
  }
  Rng rng(9);
  CHECK_THROWS_AS(sample_color_points(scan.mesh, 5, -1.0, rng), ContractViolation);
}

TEST_CASE("losses") {
  Rng rng(10);
  const Matrix labels = (random_probs(rng, 50, 1).array() > 0.5).cast<double>().matrix();
  CHECK(std::abs(occupancy_loss(Matrix::Constant(50, 1, 0.5), labels) - std::log(2.0)) <= 1e-12);
  double previous = 1e9;
  for (double eps : {1e-2, 1e-4, 1e-6, 1e-9}) {
    const Matrix pred = labels.unaryExpr([eps](double y) { return y > 0.5 ? 1 - eps : eps; });
    const double l = occupancy_loss(pred, labels);
    CHECK(l < previous);
    CHECK(l <= 1.1 * eps);
    previous = l;
  }
  const Matrix p = random_probs(rng, 40, 1), y = random_probs(rng, 40, 1);
  double bce = 0.0;
  for (int i = 0; i < 40; ++i) bce -= y(i, 0) * std::log(p(i, 0)) + (1 - y(i, 0)) * std::log(1 - p(i, 0));
  CHECK(std::abs(occupancy_loss(p, y) - bce / 40) <= 1e-12);

  const Matrix c = random_probs(rng, 30, 3);
  CHECK(color_loss(c, c) == 0.0);
  CHECK(std::abs(color_loss((c.array() + 0.1).matrix(), c) - 0.1) <= 1e-12);
  const Matrix d = random_probs(rng, 30, 3);
  double l1 = 0.0;
  for (int i = 0; i < 30; ++i)
    for (int k = 0; k < 3; ++k) l1 += std::abs(c(i, k) - d(i, k));
  CHECK(std::abs(color_loss(c, d) - l1 / 90) <= 1e-12);
  CHECK_THROWS_AS(color_loss(c, Matrix::Zero(3, 3)), ContractViolation);
}

TEST_CASE("total-loss gradient matches finite differences on a micro-batch") {
  const auto& scan = small_scan();
  const geom::SurfaceIndex index(scan.mesh);
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    ModelConfig mc = micro_model();
    mc.init_seed = 100 + seed;
    FieldModel model(mc);
    const double yaw = scan.cameras[seed * 9].yaw_deg;
    const Image input = data::render_view_input(scan.mesh, scan.cameras[seed * 9]);
    const ViewPrior prior = make_view_prior(body_in_view(scan.body, yaw), mc);
    Rng rng(seed);
    const TrainingSample sample = draw_sample(scan, index, yaw, 8, SamplingConfig{}, rng);
    const auto res = gradcheck::check(model.store(), [&](ad::Tape& t) {
      const SampleLoss l = sample_loss(t, model, input, prior, sample);
      return t.add(l.occupancy, l.color);
    });
    CHECK(res.tensors == static_cast<int>(model.store().all().size()));
    CHECK_MESSAGE(res.worst < 1e-4, res.worst_name << " rel err " << res.worst);
  }
}

TEST_CASE("samples rotate into the view frame") {
  const auto& scan = small_scan();
  const geom::SurfaceIndex index(scan.mesh);
  Rng a(11), b(11);
  const auto world = draw_sample(scan, index, 0.0, 32, SamplingConfig{}, a);
  const auto view = draw_sample(scan, index, 90.0, 32, SamplingConfig{}, b);
  CHECK(world.occupancy.labels == view.occupancy.labels);
  CHECK(world.color.colors == view.color.colors);
  for (std::size_t i = 0; i < 32; ++i) {
    const Vec3 want = oracle::rot_y(90.0) * world.occupancy.points[i];
    CHECK((view.occupancy.points[i] - want).norm() <= 1e-12);
  }
}

TEST_CASE("training loop") {
  const auto& scan = small_scan();
  TrainConfig tc = TrainConfig::desk();
  tc.points = 16;
  tc.batch = 2;
  tc.learning_rate = 1e-3;
  SUBCASE("zero steps leave the initialization in the checkpoint") {
    tc.steps = 0;
    tc.epochs = 0;
    FieldModel model(micro_model());
    const auto res = train(model, {scan}, tc);
    CHECK(res.steps == 0);
    CHECK(res.curve.empty());
    testutil::TempDir dir;
    model.save(dir.path() / "ckpt");
    const auto loaded = FieldModel::load(dir.path() / "ckpt");
    FieldModel fresh(micro_model());
    for (auto* p : fresh.store().all()) CHECK(loaded->store().get(p->name).value == p->value);
  }
  SUBCASE("epochs cover the view pairs; curves are reproducible") {
    tc.steps = 0;
    tc.epochs = 2;
    tc.views = {0, 9, 18};
    std::vector<std::pair<int, double>> epochs;
    FieldModel m1(micro_model()), m2(micro_model());
    const auto r1 = train(m1, {scan}, tc, [&](int e, double lo, double) { epochs.emplace_back(e, lo); });
    const auto r2 = train(m2, {scan}, tc);
    CHECK(r1.steps_per_epoch == 2);
    CHECK(r1.steps == 4);
    REQUIRE(epochs.size() == 2);
    CHECK(epochs[1].first == 1);
    REQUIRE(r1.curve.size() == r2.curve.size());
    for (std::size_t i = 0; i < r1.curve.size(); ++i) {
      CHECK(r1.curve[i].occupancy == r2.curve[i].occupancy);
      CHECK(r1.curve[i].color == r2.curve[i].color);
    }
    for (auto* p : m1.store().all()) CHECK(m2.store().get(p->name).value == p->value);
    const std::string csv = loss_curve_csv(r1.curve);
    CHECK(csv.rfind("step,occupancy,color\n0,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  }
  SUBCASE("a poisoned weight aborts with the step index") {
    tc.steps = 3;
    FieldModel model(micro_model());
    model.store().get("head.occupancy.layer0.weight").value(0, 0) = NAN;
    try {
      train(model, {scan}, tc);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.step() == 0);
      CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
  }
  SUBCASE("bad configuration") {
    tc.views = {40};
    FieldModel model(micro_model());
    CHECK_THROWS_AS(train(model, {scan}, tc), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"learning_rate", -1.0}}, tc), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"lr", 1.0}}, tc), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"batch", "four"}}, tc), ConfigError);
    const auto parsed = TrainConfig::from_json(TrainConfig::paper().to_json(), tc);
    CHECK(parsed.learning_rate == 1e-4);
    CHECK(parsed.batch == 4);
    CHECK(parsed.epochs == 10);
    CHECK(parsed.points == 2048);
  }
}

TEST_CASE("implicit field evaluation") {
  const auto& scan = small_scan();
  FieldModel model(micro_model());
  const Image input = data::render_view_input(scan.mesh, scan.cameras[0]);
  const ImplicitField field(model, input, make_view_prior(body_in_view(scan.body, 0.0), model.config()));
  auto eval = [&](int chunk) {
    return extraction::evaluate_grid([&](std::span<const Vec3> p, std::span<double> o) { field.occupancy(p, o); }, 12,
                                     Vec3::Constant(-1), Vec3::Constant(1), chunk)
        .values;
  };
  const auto base = eval(4096);
  CHECK(base == eval(1000));
  CHECK(base == eval(97));
  for (double v : base) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  // Matches the recording forward used in training.
  std::vector<Vec3> pts = {Vec3(0.1, 0.2, 0.0), Vec3(-0.3, -0.5, 0.1), Vec3(0.0, 0.9, -0.2)};
  std::vector<double> occ(3);
  std::vector<Vec3> col(3);
  field.occupancy(pts, occ);
  field.color(pts, col);
  ad::Tape t;
  const ViewPrior prior = make_view_prior(body_in_view(scan.body, 0.0), model.config());
  const auto planes = model.planes(t, input, prior);
  const auto batch = fusion::prepare_queries(prior.context, pts, model.config().mode);
  const auto fused = fusion::fused_features(t, planes, batch, model.config().mode);
  const Matrix o = t.value(model.heads().occupancy(t, fused));
  const Matrix c = t.value(model.heads().color(t, fused));
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(o(i, 0) - occ[i]) <= 1e-12);
    CHECK((c.row(i).transpose() - col[i]).cwiseAbs().maxCoeff() <= 1e-12);
  }
  std::vector<double> wrong(2);
  CHECK_THROWS_AS(field.occupancy(pts, wrong), ContractViolation);
}

TEST_CASE("model config") {
  const auto paper = ModelConfig::paper();
  CHECK(paper.encoder.width == 256);
  CHECK(paper.heads.hidden.front() == 512);
  const auto round = ModelConfig::from_json(micro_model().to_json(), ModelConfig::desk());
  CHECK(round.encoder.plane_size == 4);
  CHECK(round.heads.hidden == std::vector<int>{6, 4});
  auto pix = ModelConfig::from_json({{"query_mode", "pixel_aligned"}}, micro_model());
  FieldModel model(pix);
  CHECK(model.heads().input_width() == 2 * 2 + 1 + 6);
  CHECK_THROWS_AS(ModelConfig::from_json({{"query", "x"}}, pix), ConfigError);
  testutil::TempDir dir;
  CHECK_THROWS(FieldModel::load(dir.path() / "missing"));
}

TEST_CASE("reconstruction from a model") {
  const auto& scan = small_scan();
  FieldModel model(micro_model());
  const Image input = data::render_view_input(scan.mesh, scan.cameras[0]);
  extraction::ReconConfig rc;
  rc.resolution = 16;
  const auto r = extraction::reconstruct(model, input, scan.body, rc);
  if (!r.empty) {
    CHECK(r.mesh.has_colors());
    for (const Vec3& c : r.mesh.colors) CHECK((c.array() > 0.0).all());
  }
  const auto r2 = extraction::reconstruct(model, input, scan.body, rc);
  CHECK(r.mesh.vertices == r2.mesh.vertices);
  CHECK_THROWS_AS(extraction::reconstruct(model, Image(16, 16, 9), scan.body, rc), ContractViolation);
  CHECK_THROWS_AS(extraction::ReconConfig::from_json({{"resolution", 4}}, rc), ConfigError);
  CHECK(extraction::ReconConfig::paper().resolution == 256);
}
