#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "json.hpp"
#include "sidefield/data/synthetic.hpp"
#include "sidefield/training/field_model.hpp"
#include "sidefield/training/sampling.hpp"

namespace sidefield::training {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch = 4;
  int epochs = 10;
  int steps = 0;    // when > 0, overrides epochs * steps_per_epoch
  int points = 2048;  // per set (occupancy and color) per sample
  std::vector<int> views;  // camera indices used as input views; empty = all
  SamplingConfig sampling;
  std::uint64_t seed = 1;

  static TrainConfig desk();
  static TrainConfig paper();
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base);
};

struct LossRecord {
  long long step = 0;
  double occupancy = 0.0;
  double color = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> curve;  // one row per step, averaged over the batch
  long long steps = 0;
  int steps_per_epoch = 0;
};

/// Per-epoch summaries go to this callback (epoch, mean L_o, mean L_c).
using EpochLogger = std::function<void(int, double, double)>;

/// Occupancy and color point sets for one (scan, view) pair, with points
/// already rotated into the view frame.
struct TrainingSample {
  OccupancySamples occupancy;
  ColorSamples color;
};

/// Draws the point sets for a scan (world frame) and rotates them into the
/// frame of the camera with the given yaw.
TrainingSample draw_sample(const data::SyntheticScan& scan, const geom::SurfaceIndex& scan_index, double yaw_deg,
                           int points, const SamplingConfig& config, Rng& rng);

/// Sum of the two losses (unit weights) for one input view, recorded on tape.
struct SampleLoss {
  ad::Var occupancy;
  ad::Var color;
};
SampleLoss sample_loss(ad::Tape& tape, const FieldModel& model, const Image& input, const ViewPrior& prior,
                       const TrainingSample& sample);

/// Adam on L_o + L_c. Each step draws `batch` (scan, view) pairs and fresh
/// point sets from Rng(Rng::derive(seed, step)). Throws DivergenceError on a
/// non-finite loss.
TrainResult train(FieldModel& model, const std::vector<data::SyntheticScan>& scans, const TrainConfig& config,
                  const EpochLogger& log = {});

/// "step,occupancy,color" header then one row per step.
std::string loss_curve_csv(const std::vector<LossRecord>& curve);

}  // namespace sidefield::training
