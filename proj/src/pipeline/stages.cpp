#include "sidefield/pipeline/stages.hpp"

#include <cstdio>

#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"
#include "sidefield/geom/obj_io.hpp"
#include "sidefield/texture/captioner.hpp"

namespace sidefield::pipeline {

namespace {

std::string numbered(const char* prefix, int i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%03d", prefix, i);
  return buf;
}

fs::path sibling(const fs::path& rgb_png, const char* suffix) {
  fs::path p = rgb_png;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

void write_png_atomic(const fs::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  io::write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw ContractViolation(what + " not found: " + path.string());
}

nlohmann::json camera_json(const geom::Camera& c) {
  return {{"yaw", c.yaw_deg}, {"scale", c.scale}, {"tx", c.tx}, {"ty", c.ty}, {"resolution", c.resolution}};
}

}  // namespace

void write_json(const fs::path& path, const nlohmann::json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  require_file(path, "JSON file");
  try {
    return nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractViolation("invalid JSON in " + path.string() + ": " + e.what());
  }
}

fs::path subject_dir(const fs::path& data_dir, int subject) { return data_dir / numbered("subject", subject); }
fs::path view_path(const fs::path& subject, int view) { return subject / (numbered("view", view) + ".png"); }

void save_view_input(const fs::path& rgb_png, const Image& input) {
  const auto parts = data::split_view_input(input);
  write_png_atomic(rgb_png, parts[0]);
  write_png_atomic(sibling(rgb_png, ".front_normal.png"), parts[1]);
  write_png_atomic(sibling(rgb_png, ".back_normal.png"), parts[2]);
}

Image load_view_input(const fs::path& rgb_png) {
  require_file(rgb_png, "input image");
  const fs::path front = sibling(rgb_png, ".front_normal.png"), back = sibling(rgb_png, ".back_normal.png");
  require_file(front, "front normal image");
  require_file(back, "back normal image");
  const Image rgb = read_png(rgb_png);
  if (rgb.channels != 3) throw ContractViolation("input image must be RGB: " + rgb_png.string());
  return data::merge_view_input(rgb, read_png(front), read_png(back));
}

void gen_data(const PipelineConfig& config, const fs::path& out_dir, const Log& log) {
  fs::create_directories(out_dir);
  nlohmann::json subjects = nlohmann::json::array();
  for (int s = 0; s < config.subjects; ++s) {
    const data::SyntheticScan scan = data::generate_scan(config.data, Rng::derive(config.seed, static_cast<std::uint64_t>(s)));
    const fs::path dir = subject_dir(out_dir, s);
    fs::create_directories(dir);
    geom::write_obj(dir / "scan.obj", scan.mesh);
    write_json(dir / "body.json", scan.body.to_json());
    nlohmann::json cams = nlohmann::json::array();
    for (std::size_t v = 0; v < scan.cameras.size(); ++v) {
      cams.push_back(camera_json(scan.cameras[v]));
      save_view_input(view_path(dir, static_cast<int>(v)), data::render_view_input(scan.mesh, scan.cameras[v]));
    }
    write_json(dir / "cameras.json", {{"scan_scale_cm", scan.scan_scale_cm}, {"cameras", cams}});
    subjects.push_back(dir.filename().string());
    if (log) log("generated " + dir.string());
  }
  write_json(out_dir / "dataset.json", {{"config", config.to_json()}, {"subjects", subjects}});
}

data::SyntheticScan load_subject(const fs::path& dir) {
  require_file(dir / "scan.obj", "scan mesh");
  data::SyntheticScan scan;
  scan.mesh = geom::read_obj(dir / "scan.obj");
  scan.body = body::BodyParams::from_json(read_json(dir / "body.json"));
  const nlohmann::json cams = read_json(dir / "cameras.json");
  try {
    scan.scan_scale_cm = cams.at("scan_scale_cm").get<double>();
    for (const auto& c : cams.at("cameras"))
      scan.cameras.push_back(geom::Camera{c.at("yaw").get<double>(), c.at("scale").get<double>(), c.at("tx").get<double>(),
                                          c.at("ty").get<double>(), c.at("resolution").get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation("malformed cameras.json in " + dir.string() + ": " + e.what());
  }
  return scan;
}

std::vector<data::SyntheticScan> load_dataset(const fs::path& data_dir) {
  const nlohmann::json manifest = read_json(data_dir / "dataset.json");
  std::vector<data::SyntheticScan> scans;
  for (const auto& name : manifest.at("subjects")) scans.push_back(load_subject(data_dir / name.get<std::string>()));
  if (scans.empty()) throw ContractViolation("dataset has no subjects: " + data_dir.string());
  return scans;
}

training::TrainResult train_stage(const PipelineConfig& config, const fs::path& data_dir, const fs::path& checkpoint,
                                  const Log& log) {
  const auto scans = load_dataset(data_dir);
  training::FieldModel model(config.model);
  const training::TrainResult result = training::train(model, scans, config.train, [&](int epoch, double lo, double lc) {
    if (log) log("epoch " + std::to_string(epoch) + " L_o " + io::format_double(lo) + " L_c " + io::format_double(lc));
  });
  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
  model.save(checkpoint, {{"train", config.train.to_json()}, {"steps", result.steps}});
  io::write_file_atomic(fs::path(checkpoint.string() + ".loss.csv"), training::loss_curve_csv(result.curve));
  return result;
}

geom::TriMesh reconstruct_stage(const fs::path& checkpoint, const fs::path& image, const fs::path& body_params,
                                double yaw_deg, const extraction::ReconConfig& recon, const fs::path& out_obj) {
  require_file(fs::path(checkpoint.string() + ".json"), "checkpoint");
  const auto model = training::FieldModel::load(checkpoint);
  const Image input = load_view_input(image);
  const body::BodyParams body = body::BodyParams::from_json(read_json(body_params));
  geom::TriMesh mesh = eval::reconstruct_world(*model, input, yaw_deg, body, recon);
  if (out_obj.has_parent_path()) fs::create_directories(out_obj.parent_path());
  geom::write_obj(out_obj, mesh);
  return mesh;
}

texture::RefineResult refine_stage(const fs::path& mesh_obj, const fs::path& input_png, double yaw_deg,
                                   texture::Refiner& refiner, const texture::RefineConfig& config,
                                   const RefineOutputs& out, const Log& log) {
  require_file(mesh_obj, "mesh");
  require_file(input_png, "input image");
  geom::TriMesh mesh = geom::read_obj(mesh_obj);
  if (yaw_deg != 0.0) mesh = geom::transformed(mesh, geom::yaw_rotation(yaw_deg), Vec3::Zero());
  Image input = read_png(input_png);
  if (input.channels != 3) throw ContractViolation("refine input image must be RGB");
  texture::RefineConfig cfg = config;
  if (cfg.prompt.empty()) {
    auto captioner = texture::captioner_from_env();
    cfg.prompt = texture::image_to_text(input, *captioner);
  }
  if (log) log("prompt: " + cfg.prompt);
  const texture::TextureMap initial = texture::unwrap_and_backproject(mesh, cfg.uv);
  texture::RefineResult result =
      texture::optimize_texture(initial, mesh, input, cfg, refiner, nullptr, [&](int step, const texture::ObjectiveTerms& t) {
        if (log && step % 50 == 0) log("step " + std::to_string(step) + " objective " + io::format_double(t.total));
      });
  if (out.texture_png.has_parent_path()) fs::create_directories(out.texture_png.parent_path());
  write_png_atomic(out.texture_png, result.texture.texels);
  nlohmann::json manifest = result.texture.manifest();
  manifest["prompt"] = cfg.prompt;
  manifest["refiner"] = refiner.name();
  manifest["config"] = cfg.to_json();
  manifest["best_step"] = result.best_step;
  manifest["covered_texels"] = result.covered_texels;
  fs::path manifest_path = out.texture_png;
  manifest_path.replace_extension(".json");
  write_json(manifest_path, manifest);
  if (out.renders_dir) {
    fs::create_directories(*out.renders_dir);
    const auto renders = texture::render_views(result.texture, mesh, cfg.sweep());
    for (std::size_t v = 0; v < renders.size(); ++v) {
      write_png_atomic(*out.renders_dir / (numbered("render", static_cast<int>(v)) + ".png"), renders[v].rgb);
      write_png_atomic(*out.renders_dir / (numbered("target", static_cast<int>(v)) + ".png"), result.targets[v].rgb);
    }
  }
  return result;
}

eval::MetricReport eval_stage(const fs::path& recon_obj, const fs::path& gt_obj, const eval::EvalConfig& config,
                              const fs::path& report) {
  require_file(recon_obj, "reconstruction");
  require_file(gt_obj, "ground-truth mesh");
  const eval::MetricReport r = eval::evaluate(geom::read_obj(recon_obj), geom::read_obj(gt_obj), config);
  if (!report.empty()) {
    if (report.has_parent_path()) fs::create_directories(report.parent_path());
    write_json(report, r.to_json());
  }
  return r;
}

eval::RobustnessReport robustness_stage(const PipelineConfig& config, const fs::path& checkpoint,
                                        const fs::path& subject, int view, const fs::path& report) {
  require_file(fs::path(checkpoint.string() + ".json"), "checkpoint");
  const auto model = training::FieldModel::load(checkpoint);
  const data::SyntheticScan scan = load_subject(subject);
  if (view < 0 || view >= static_cast<int>(scan.cameras.size())) throw ConfigError("view index outside the camera ring");
  const Image input = load_view_input(view_path(subject, view));
  eval::EvalConfig ec = config.eval;
  ec.scan_scale_cm = scan.scan_scale_cm;
  const eval::RobustnessReport r = eval::robustness_eval(*model, input, scan.cameras[view].yaw_deg, scan.body, scan.mesh,
                                                         config.robustness, config.recon, ec);
  if (!report.empty()) {
    if (report.has_parent_path()) fs::create_directories(report.parent_path());
    write_json(report, r.to_json());
  }
  return r;
}

nlohmann::json ablate_stage(const PipelineConfig& config, const fs::path& data_dir, const fs::path& out_dir,
                            const Log& log) {
  fs::create_directories(out_dir);
  const auto scans = load_dataset(data_dir);
  const fs::path subject = subject_dir(data_dir, 0);
  const Image input = load_view_input(view_path(subject, config.input_view));
  const double yaw = scans[0].cameras.at(static_cast<std::size_t>(config.input_view)).yaw_deg;
  eval::EvalConfig ec = eval::relative_to_view(config.eval, yaw);
  ec.scan_scale_cm = scans[0].scan_scale_cm;
  nlohmann::json out;
  for (const auto mode : {fusion::QueryMode::kHybrid, fusion::QueryMode::kPixelAligned}) {
    PipelineConfig c = config;
    c.model.mode = mode;
    const std::string name = mode == fusion::QueryMode::kHybrid ? "hybrid" : "pixel_aligned";
    if (log) log("training " + name);
    training::FieldModel model(c.model);
    training::train(model, scans, c.train);
    model.save(out_dir / name, {{"train", c.train.to_json()}});
    const geom::TriMesh recon = eval::reconstruct_world(model, input, yaw, scans[0].body, c.recon);
    geom::write_obj(out_dir / (name + ".obj"), recon);
    out[name] = eval::evaluate(recon, scans[0].mesh, ec).to_json();
  }
  write_json(out_dir / "ablation.json", out);
  return out;
}

}  // namespace sidefield::pipeline
