#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sidefield/pipeline/config.hpp"

namespace sidefield::pipeline {

namespace fs = std::filesystem;

using Log = std::function<void(const std::string&)>;

/// Dataset layout under out_dir:
///   dataset.json                          config echo and subject list
///   subject_NNN/scan.obj                  colored ground-truth mesh (world frame)
///   subject_NNN/body.json                 exact body parameters
///   subject_NNN/cameras.json              yaw, scale, translation, resolution per view
///   subject_NNN/view_VVV.png              RGB input
///   subject_NNN/view_VVV.front_normal.png clothed front normals
///   subject_NNN/view_VVV.back_normal.png  clothed back normals, mirrored to the front
void gen_data(const PipelineConfig& config, const fs::path& out_dir, const Log& log = {});

fs::path subject_dir(const fs::path& data_dir, int subject);
fs::path view_path(const fs::path& subject, int view);
data::SyntheticScan load_subject(const fs::path& dir);
std::vector<data::SyntheticScan> load_dataset(const fs::path& data_dir);

/// Nine-channel network input from an RGB PNG and its two sibling normal PNGs.
Image load_view_input(const fs::path& rgb_png);
void save_view_input(const fs::path& rgb_png, const Image& input);

/// Trains on every subject of the dataset and writes <stem>.bin/.json and
/// <stem>.loss.csv.
training::TrainResult train_stage(const PipelineConfig& config, const fs::path& data_dir, const fs::path& checkpoint,
                                  const Log& log = {});

/// Reconstruction from one input view; the mesh is written in the world frame.
geom::TriMesh reconstruct_stage(const fs::path& checkpoint, const fs::path& image, const fs::path& body_params,
                                double yaw_deg, const extraction::ReconConfig& recon, const fs::path& out_obj);

struct RefineOutputs {
  fs::path texture_png;
  std::optional<fs::path> renders_dir;
};

/// Texture refinement of a colored world-frame mesh seen from an input view
/// with the given yaw. An empty prompt is filled by the captioner.
texture::RefineResult refine_stage(const fs::path& mesh_obj, const fs::path& input_png, double yaw_deg,
                                   texture::Refiner& refiner, const texture::RefineConfig& config,
                                   const RefineOutputs& out, const Log& log = {});

eval::MetricReport eval_stage(const fs::path& recon_obj, const fs::path& gt_obj, const eval::EvalConfig& config,
                              const fs::path& report);

eval::RobustnessReport robustness_stage(const PipelineConfig& config, const fs::path& checkpoint,
                                        const fs::path& subject, int view, const fs::path& report);

/// Trains a hybrid and a pixel-aligned model on the same data and writes
/// {"hybrid": report, "pixel_aligned": report} to out_dir/ablation.json.
nlohmann::json ablate_stage(const PipelineConfig& config, const fs::path& data_dir, const fs::path& out_dir,
                            const Log& log = {});

void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

}  // namespace sidefield::pipeline
