#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"
#include "sidefield/pipeline/stages.hpp"
#include "sidefield/texture/refiner.hpp"

namespace sf = sidefield;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_path;
  std::string preset;
  bool sequential = false;
  bool quiet = false;
};

sf::pipeline::PipelineConfig load_config(const Globals& g) {
  if (!g.config_path.empty()) {
    auto c = sf::pipeline::PipelineConfig::load(g.config_path);
    if (!g.preset.empty() && g.preset != c.preset) throw sf::ConfigError("--preset conflicts with the config file preset");
    return c;
  }
  return sf::pipeline::PipelineConfig::from_preset(g.preset.empty() ? "desk" : g.preset);
}

sf::pipeline::Log logger(const Globals& g) {
  if (g.quiet) return {};
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

// "start:end:step", end exclusive.
void parse_sweep(const std::string& spec, sf::texture::RefineConfig& cfg) {
  double a = 0, b = 0, c = 0;
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%lf%c", &a, &b, &c, &tail) != 3)
    throw sf::ConfigError("--sweep expects start:end:step, got '" + spec + "'");
  cfg.sweep_start = a;
  cfg.sweep_end = b;
  cfg.sweep_step = c;
}

std::vector<double> parse_yaws(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw sf::ConfigError("--views expects comma-separated yaw degrees, got '" + list + "'");
    }
  }
  if (out.empty()) throw sf::ConfigError("--views is empty");
  return out;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-view clothed human reconstruction and texture refinement"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--preset", g.preset, "desk or paper (ignored with --config unless equal)");
  app.add_flag("--sequential", g.sequential, "Run every kernel on one thread");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic clothed scans and view renders");
  std::string gen_out;
  std::optional<int> gen_subjects;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--out", gen_out, "Dataset directory")->required();
  gen->add_option("--subjects", gen_subjects, "Number of subjects");
  gen->add_option("--seed", gen_seed, "Dataset seed");

  // train
  auto* train = app.add_subcommand("train", "Train the implicit field on a dataset");
  std::string train_data, train_ckpt;
  std::optional<int> train_steps;
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--checkpoint", train_ckpt, "Checkpoint stem (writes .bin, .json, .loss.csv)")->required();
  train->add_option("--steps", train_steps, "Optimizer steps");

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "Reconstruct a colored mesh from one input view");
  std::string rc_ckpt, rc_image, rc_body, rc_out;
  double rc_yaw = 0.0;
  std::optional<int> rc_res;
  recon->add_option("--checkpoint", rc_ckpt, "Checkpoint stem")->required();
  recon->add_option("--image", rc_image, "RGB PNG with .front_normal.png/.back_normal.png siblings")->required();
  recon->add_option("--body-params", rc_body, "Body parameter JSON")->required();
  recon->add_option("--yaw", rc_yaw, "Input camera yaw in degrees");
  recon->add_option("--mc-res", rc_res, "Marching-cubes resolution");
  recon->add_option("--out", rc_out, "Output OBJ")->required();

  // refine
  auto* refine = app.add_subcommand("refine", "Optimize a texture for side and back views");
  std::string rf_mesh, rf_image, rf_kind = "rotate", rf_fixture, rf_sweep, rf_tex, rf_renders;
  std::optional<std::string> rf_prompt;
  std::optional<int> rf_steps;
  double rf_yaw = 0.0;
  refine->add_option("--mesh", rf_mesh, "Colored OBJ in the world frame")->required();
  refine->add_option("--input-image", rf_image, "RGB input view")->required();
  refine->add_option("--yaw", rf_yaw, "Input camera yaw in degrees");
  refine->add_option("--refiner", rf_kind, "identity, rotate, fixture or external");
  refine->add_option("--fixture-dir", rf_fixture, "Directory of view_NNN.sfimg for --refiner fixture");
  refine->add_option("--prompt", rf_prompt, "Refiner prompt; captioned from the input when omitted");
  refine->add_option("--sweep", rf_sweep, "start:end:step yaw degrees, end exclusive");
  refine->add_option("--steps", rf_steps, "Optimizer steps");
  refine->add_option("--out-texture", rf_tex, "Texture PNG (manifest written next to it)")->required();
  refine->add_option("--out-renders", rf_renders, "Directory for sweep renders and targets");

  // eval
  auto* ev = app.add_subcommand("eval", "Compare a reconstruction with a ground-truth mesh");
  std::string ev_recon, ev_gt, ev_views, ev_report;
  std::optional<double> ev_scale;
  ev->add_option("--recon", ev_recon, "Reconstructed OBJ")->required();
  ev->add_option("--gt", ev_gt, "Ground-truth OBJ")->required();
  ev->add_option("--scan-scale-cm", ev_scale, "Centimetres per scene unit");
  ev->add_option("--views", ev_views, "Comma-separated normal/PSNR yaws");
  ev->add_option("--report", ev_report, "Report JSON path");

  // robustness
  auto* rob = app.add_subcommand("robustness", "Metric degradation under body-parameter noise");
  std::string rb_ckpt, rb_subject, rb_report;
  int rb_view = 0;
  std::optional<double> rb_scale;
  rob->add_option("--checkpoint", rb_ckpt, "Checkpoint stem")->required();
  rob->add_option("--subject", rb_subject, "Subject directory from gen-data")->required()->check(CLI::ExistingDirectory);
  rob->add_option("--view", rb_view, "Input view index");
  rob->add_option("--noise-scale", rb_scale, "Perturbation scale");
  rob->add_option("--report", rb_report, "Report JSON path");

  // ablate
  auto* abl = app.add_subcommand("ablate", "Hybrid versus pixel-aligned queries on the same data");
  std::string ab_data, ab_out;
  abl->add_option("--data", ab_data, "Dataset directory")->required();
  abl->add_option("--out", ab_out, "Output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "gen-data, train, reconstruct, refine and eval into one directory");
  std::string run_out, run_refiner = "rotate";
  bool run_no_refine = false;
  run->add_option("--out", run_out, "Run directory")->required();
  run->add_option("--refiner", run_refiner, "Refiner for the texture stage");
  run->add_flag("--no-refine", run_no_refine, "Skip the texture stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(sf::ExitCode::kConfig);
  }

  try {
    sf::parallel::set_sequential(g.sequential);
    auto config = load_config(g);
    const auto log = logger(g);

    if (*gen) {
      if (gen_subjects) config.subjects = *gen_subjects;
      if (gen_seed) config.seed = *gen_seed;
      if (config.subjects < 1) throw sf::ConfigError("--subjects must be positive");
      sf::pipeline::gen_data(config, gen_out, log);
    } else if (*train) {
      if (train_steps) config.train.steps = *train_steps;
      const auto result = sf::pipeline::train_stage(config, train_data, train_ckpt, log);
      const auto& last = result.curve.back();
      print_json({{"steps", result.steps}, {"occupancy", last.occupancy}, {"color", last.color}});
    } else if (*recon) {
      if (rc_res) config.recon.resolution = *rc_res;
      const auto mesh = sf::pipeline::reconstruct_stage(rc_ckpt, rc_image, rc_body, rc_yaw, config.recon, rc_out);
      print_json({{"vertices", mesh.vertices.size()}, {"faces", mesh.faces.size()}});
    } else if (*refine) {
      auto cfg = config.refine;
      if (rf_prompt) cfg.prompt = *rf_prompt;
      if (!rf_sweep.empty()) parse_sweep(rf_sweep, cfg);
      if (rf_steps) cfg.steps = *rf_steps;
      cfg.validate();
      auto refiner = sf::texture::make_refiner(rf_kind, rf_fixture);
      sf::pipeline::RefineOutputs out{rf_tex, {}};
      if (!rf_renders.empty()) out.renders_dir = fs::path(rf_renders);
      const auto result = sf::pipeline::refine_stage(rf_mesh, rf_image, rf_yaw, *refiner, cfg, out, log);
      print_json({{"best_step", result.best_step}, {"objective", result.history.at(result.best_step).total}});
    } else if (*ev) {
      if (ev_scale) config.eval.scan_scale_cm = *ev_scale;
      if (!ev_views.empty()) config.eval.yaws = parse_yaws(ev_views);
      print_json(sf::pipeline::eval_stage(ev_recon, ev_gt, config.eval, ev_report).to_json());
    } else if (*rob) {
      if (rb_scale) config.robustness.noise_scale = *rb_scale;
      print_json(sf::pipeline::robustness_stage(config, rb_ckpt, rb_subject, rb_view, rb_report).to_json());
    } else if (*abl) {
      print_json(sf::pipeline::ablate_stage(config, ab_data, ab_out, log));
    } else if (*run) {
      const fs::path dir = run_out;
      const auto data = dir / "data";
      sf::pipeline::gen_data(config, data, log);
      sf::pipeline::train_stage(config, data, dir / "model", log);
      const fs::path subject = sf::pipeline::subject_dir(data, 0);
      const auto scan = sf::pipeline::load_subject(subject);
      const double yaw = scan.cameras.at(static_cast<std::size_t>(config.input_view)).yaw_deg;
      const fs::path image = sf::pipeline::view_path(subject, config.input_view);
      sf::pipeline::reconstruct_stage(dir / "model", image, subject / "body.json", yaw, config.recon, dir / "recon.obj");
      auto ec = sf::eval::relative_to_view(config.eval, yaw);
      ec.scan_scale_cm = scan.scan_scale_cm;
      const auto report = sf::pipeline::eval_stage(dir / "recon.obj", subject / "scan.obj", ec, dir / "report.json");
      if (!run_no_refine) {
        auto refiner = sf::texture::make_refiner(run_refiner);
        sf::pipeline::refine_stage(dir / "recon.obj", image, yaw, *refiner, config.refine,
                                   {dir / "texture.png", dir / "renders"}, log);
      }
      print_json(report.to_json());
    }
    return 0;
  } catch (const sf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
