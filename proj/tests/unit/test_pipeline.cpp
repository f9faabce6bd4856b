#include <cstdlib>
#include <sys/wait.h>

#include "doctest.h"
#include "test_util.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"
#include "sidefield/geom/obj_io.hpp"
#include "sidefield/pipeline/stages.hpp"

using namespace sidefield;
using namespace sidefield::pipeline;

namespace {

// Tiny everything: 8 px inputs, a two-layer head and a 16^3 lattice.
PipelineConfig micro_config() {
  PipelineConfig c = PipelineConfig::from_preset("desk");
  c.data.resolution = 16;
  c.data.views = 4;
  auto& e = c.model.encoder;
  e.input_size = 16;
  e.patch = 4;
  e.width = 8;
  e.heads = 2;
  e.encoder_depth = 1;
  e.front_depth = 1;
  e.side_depth = 1;
  e.plane_size = 8;
  e.plane_channels = 4;
  c.model.heads.hidden = {16, 8};
  c.train.steps = 150;
  c.train.points = 256;
  c.train.learning_rate = 3e-3;
  c.recon.resolution = 16;
  c.eval.samples = 500;
  c.eval.resolution = 16;
  c.robustness.seeds = {0, 1};
  return c;
}

// Dataset plus trained checkpoint shared by the cases below.
struct MicroRun {
  testutil::TempDir dir;
  PipelineConfig config = micro_config();
  fs::path data = dir / "data";
  fs::path ckpt = dir / "model";
  MicroRun() {
    gen_data(config, data);
    train_stage(config, data, ckpt);
  }
};

MicroRun& micro_run() {
  static MicroRun run;
  return run;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SIDEFIELD_CLI_PATH) + " -q " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("pipeline config") {
  const auto desk = PipelineConfig::from_preset("desk");
  CHECK(desk.train.views == std::vector<int>{0});
  CHECK(desk.train.steps == 2000);
  CHECK(desk.recon.resolution == 64);
  const auto paper = PipelineConfig::from_preset("paper");
  CHECK(paper.subjects == 490);
  CHECK(paper.recon.resolution == 256);
  CHECK(paper.refine.view_resolution == 512);
  CHECK_THROWS_AS(PipelineConfig::from_preset("huge"), ConfigError);

  const auto round = PipelineConfig::from_json(micro_config().to_json());
  CHECK(round.to_json() == micro_config().to_json());
  const auto over = PipelineConfig::from_json({{"train", {{"steps", 7}}}, {"seed", 9}});
  CHECK(over.train.steps == 7);
  CHECK(over.train.learning_rate == desk.train.learning_rate);
  CHECK(over.seed == 9);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"trian", {}}}), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"train", {{"steps", "many"}}}}), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::array()), ConfigError);

  testutil::TempDir dir;
  io::write_file_atomic(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(PipelineConfig::load(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::load(dir / "missing.json"), ConfigError);
}

TEST_CASE("generated dataset round-trips through the artifact layout") {
  auto& run = micro_run();
  const fs::path subject = subject_dir(run.data, 0);
  const auto regenerated = data::generate_dataset(run.config.data, 1, run.config.seed);
  const auto loaded = load_subject(subject);
  CHECK(loaded.body == regenerated[0].body);
  CHECK(loaded.cameras.size() == 4);
  CHECK(loaded.mesh.faces == regenerated[0].mesh.faces);
  double worst = 0.0;
  for (std::size_t i = 0; i < loaded.mesh.vertices.size(); ++i)
    worst = std::max(worst, (loaded.mesh.vertices[i] - regenerated[0].mesh.vertices[i]).cwiseAbs().maxCoeff());
  CHECK(worst == 0.0);
  const Image input = load_view_input(view_path(subject, 2));
  const Image expected = data::render_view_input(regenerated[0].mesh, regenerated[0].cameras[2]);
  CHECK(input.data == expected.data);
  CHECK(fs::exists(fs::path(run.ckpt.string() + ".loss.csv")));
  CHECK_THROWS_AS(load_subject(run.dir / "nowhere"), ContractViolation);
  CHECK_THROWS_AS(load_view_input(run.dir / "nowhere.png"), ContractViolation);
}

TEST_CASE("reconstruct and eval stages") {
  auto& run = micro_run();
  const fs::path subject = subject_dir(run.data, 0);
  const auto mesh = reconstruct_stage(run.ckpt, view_path(subject, 1), subject / "body.json", 90.0, run.config.recon,
                                      run.dir / "recon.obj");
  CHECK(!mesh.faces.empty());
  const auto again = reconstruct_stage(run.ckpt, view_path(subject, 1), subject / "body.json", 90.0,
                                       run.config.recon, run.dir / "recon2.obj");
  CHECK(io::read_file(run.dir / "recon.obj") == io::read_file(run.dir / "recon2.obj"));
  const auto report = eval_stage(run.dir / "recon.obj", subject / "scan.obj", run.config.eval, run.dir / "r.json");
  CHECK(report.chamfer > 0.0);
  CHECK(read_json(run.dir / "r.json") == report.to_json());
  CHECK_THROWS_AS(reconstruct_stage(run.dir / "nope", view_path(subject, 1), subject / "body.json", 0.0,
                                    run.config.recon, run.dir / "x.obj"),
                  ContractViolation);
}

TEST_CASE("robustness report") {
  auto& run = micro_run();
  const fs::path subject = subject_dir(run.data, 0);
  PipelineConfig c = run.config;
  c.robustness.noise_scale = 0.0;
  const auto zero = robustness_stage(c, run.ckpt, subject, 0, run.dir / "zero.json");
  REQUIRE(zero.runs.size() == 2);
  for (const auto& r : zero.runs) CHECK(r.to_json().dump() == zero.clean.to_json().dump());
  CHECK(zero.to_json().at("chamfer_degradation").get<double>() == 0.0);
  c.robustness.noise_scale = 0.05;
  const auto noisy = robustness_stage(c, run.ckpt, subject, 0, {});
  CHECK(noisy.clean.to_json().dump() == zero.clean.to_json().dump());
  CHECK(noisy.runs[0].chamfer != noisy.clean.chamfer);
  CHECK_THROWS_AS(robustness_stage(c, run.ckpt, subject, 9, {}), ConfigError);
  CHECK_THROWS_AS(eval::RobustnessConfig::from_json({{"noise_scale", -1.0}}, {}), ConfigError);
  CHECK_THROWS_AS(eval::RobustnessConfig::from_json({{"seeds", nlohmann::json::array()}}, {}), ConfigError);
}

TEST_CASE("command-line exit codes") {
  auto& run = micro_run();
  testutil::TempDir dir;
  const fs::path subject = subject_dir(run.data, 0);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("train --data x") == 2);
  CHECK(run_cli("--preset bogus gen-data --out " + (dir / "d").string()) == 2);
  io::write_file_atomic(dir / "cfg.json", R"({"train": {"stepz": 3}})");
  CHECK(run_cli("--config " + (dir / "cfg.json").string() + " gen-data --out " + (dir / "d").string()) == 2);
  CHECK(run_cli("train --data " + (dir / "empty").string() + " --checkpoint " + (dir / "m").string()) == 3);
  CHECK(run_cli("eval --recon " + (dir / "none.obj").string() + " --gt " + (subject / "scan.obj").string()) == 3);
  CHECK(run_cli("eval --recon " + (subject / "scan.obj").string() + " --gt " + (subject / "scan.obj").string() +
                " --views 0,abc") == 2);
  CHECK(run_cli("eval --recon " + (subject / "scan.obj").string() + " --gt " + (subject / "scan.obj").string() +
                " --views 0,180 --report " + (dir / "self.json").string()) == 0);
  CHECK(read_json(dir / "self.json").at("chamfer").get<double>() == 0.0);
  CHECK(run_cli("refine --mesh " + (subject / "scan.obj").string() + " --input-image " +
                view_path(subject, 0).string() + " --sweep 1:2 --out-texture " + (dir / "t.png").string()) == 2);
  CHECK(run_cli("refine --mesh " + (subject / "scan.obj").string() + " --input-image " +
                view_path(subject, 0).string() + " --refiner fixture --fixture-dir " + (dir / "nofix").string() +
                " --steps 2 --out-texture " + (dir / "t.png").string()) == 3);
  // External refiner against a closed port: retries exhausted.
  const std::string env = "SIDEFIELD_REFINER_URL=http://127.0.0.1:9 ";
  const int status = std::system((env + SIDEFIELD_CLI_PATH + " -q refine --mesh " + (subject / "scan.obj").string() +
                                  " --input-image " + view_path(subject, 0).string() +
                                  " --refiner external --prompt x --steps 2 --out-texture " + (dir / "t.png").string() +
                                  " >/dev/null 2>&1")
                                     .c_str());
  CHECK(WEXITSTATUS(status) == 4);
}

TEST_CASE("refine stage writes texture, manifest and renders") {
  auto& run = micro_run();
  const fs::path subject = subject_dir(run.data, 0);
  texture::RefineConfig cfg = run.config.refine;
  cfg.uv.resolution = 256;
  cfg.view_resolution = 24;
  cfg.sweep_start = 160;
  cfg.sweep_end = 200;
  cfg.sweep_step = 20;
  cfg.steps = 3;
  cfg.prompt = "";
  texture::IdentityRefiner identity;
  const auto result = refine_stage(subject / "scan.obj", view_path(subject, 1), 90.0, identity, cfg,
                                   {run.dir / "tex" / "t.png", run.dir / "renders"});
  CHECK(fs::exists(run.dir / "tex" / "t.png"));
  const auto manifest = read_json(run.dir / "tex" / "t.json");
  CHECK(manifest.at("refiner") == "identity");
  CHECK(manifest.at("prompt").get<std::string>().rfind("the back side of ", 0) == 0);
  CHECK(manifest.at("best_step") == result.best_step);
  CHECK(fs::exists(run.dir / "renders" / "render_001.png"));
  CHECK(fs::exists(run.dir / "renders" / "target_001.png"));
  CHECK(!fs::exists(run.dir / "renders" / "render_002.png"));
}
