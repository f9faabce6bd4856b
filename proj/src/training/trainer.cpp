#include "sidefield/training/trainer.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"
#include "sidefield/geom/camera.hpp"

namespace sidefield::training {

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch = 1;
  c.epochs = 0;
  c.steps = 2000;
  c.points = 1024;
  return c;
}

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch", batch},   {"epochs", epochs},
          {"steps", steps},                 {"points", points}, {"views", views},
          {"sampling", sampling.to_json()}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("training config must be an object");
  TrainConfig c = base;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch") c.batch = value.get<int>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "steps") c.steps = value.get<int>();
      else if (key == "points") c.points = value.get<int>();
      else if (key == "views") c.views = value.get<std::vector<int>>();
      else if (key == "sampling") c.sampling = SamplingConfig::from_json(value, c.sampling);
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown training config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  if (!(c.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (c.batch < 1 || c.points < 1) throw ConfigError("batch and points must be >= 1");
  if (c.epochs < 0 || c.steps < 0) throw ConfigError("epochs and steps must be >= 0");
  return c;
}

TrainingSample draw_sample(const data::SyntheticScan& scan, const geom::SurfaceIndex& scan_index, double yaw_deg,
                           int points, const SamplingConfig& config, Rng& rng) {
  TrainingSample s;
  s.occupancy = sample_occupancy_points(scan.mesh, scan_index, points, config, rng);
  s.color = sample_color_points(scan.mesh, points, config.color_sigma_cm / scan.scan_scale_cm, rng);
  if (yaw_deg != 0.0) {
    const Mat3 r = geom::yaw_rotation(yaw_deg);
    for (Vec3& p : s.occupancy.points) p = r * p;
    for (Vec3& p : s.color.points) p = r * p;
  }
  return s;
}

SampleLoss sample_loss(ad::Tape& tape, const FieldModel& model, const Image& input, const ViewPrior& prior,
                       const TrainingSample& sample) {
  const auto mode = model.config().mode;
  const encoder::PlaneVars planes = model.planes(tape, input, prior);
  const auto occ_batch = fusion::prepare_queries(prior.context, sample.occupancy.points, mode);
  const auto col_batch = fusion::prepare_queries(prior.context, sample.color.points, mode);
  const ad::Var occ = model.heads().occupancy(tape, fusion::fused_features(tape, planes, occ_batch, mode));
  const ad::Var col = model.heads().color(tape, fusion::fused_features(tape, planes, col_batch, mode));
  return {tape.bce_mean(occ, sample.occupancy.labels), tape.l1_mean(col, sample.color.colors)};
}

namespace {

struct ViewCache {
  Image input;
  ViewPrior prior;
};

}  // namespace

TrainResult train(FieldModel& model, const std::vector<data::SyntheticScan>& scans, const TrainConfig& config,
                  const EpochLogger& log) {
  if (scans.empty()) throw ContractViolation("train: no scans");
  std::vector<std::pair<int, int>> pairs;
  for (int s = 0; s < static_cast<int>(scans.size()); ++s) {
    const int n_views = static_cast<int>(scans[s].cameras.size());
    if (config.views.empty()) {
      for (int v = 0; v < n_views; ++v) pairs.emplace_back(s, v);
    } else {
      for (int v : config.views) {
        if (v < 0 || v >= n_views) throw ConfigError("train: view index out of range: " + std::to_string(v));
        pairs.emplace_back(s, v);
      }
    }
  }
  if (pairs.empty()) throw ContractViolation("train: scans have no cameras");

  TrainResult result;
  result.steps_per_epoch = static_cast<int>((pairs.size() + config.batch - 1) / config.batch);
  result.steps = config.steps > 0 ? config.steps : static_cast<long long>(config.epochs) * result.steps_per_epoch;

  std::vector<std::unique_ptr<geom::SurfaceIndex>> indexes(scans.size());
  std::map<std::pair<int, int>, ViewCache> views;
  auto view = [&](std::pair<int, int> key) -> const ViewCache& {
    auto it = views.find(key);
    if (it != views.end()) return it->second;
    const auto& scan = scans[key.first];
    const geom::Camera& cam = scan.cameras[key.second];
    geom::Camera input_cam = cam;
    input_cam.resolution = model.config().encoder.input_size;
    ViewCache vc{data::render_view_input(scan.mesh, input_cam),
                 make_view_prior(body_in_view(scan.body, cam.yaw_deg), model.config())};
    return views.emplace(key, std::move(vc)).first->second;
  };

  ad::Adam adam({config.learning_rate});
  double epoch_occ = 0.0, epoch_col = 0.0;
  int epoch_steps = 0;
  for (long long step = 0; step < result.steps; ++step) {
    Rng rng(Rng::derive(config.seed, static_cast<std::uint64_t>(step)));
    LossRecord rec{step, 0.0, 0.0};
    try {
      model.store().zero_grad();
      ad::Tape tape;
      ad::Var total;
      for (int b = 0; b < config.batch; ++b) {
        const auto key = pairs[rng.below(pairs.size())];
        const auto& scan = scans[key.first];
        if (!indexes[key.first]) indexes[key.first] = std::make_unique<geom::SurfaceIndex>(scan.mesh);
        const ViewCache& vc = view(key);
        const TrainingSample sample =
            draw_sample(scan, *indexes[key.first], scan.cameras[key.second].yaw_deg, config.points, config.sampling, rng);
        const SampleLoss sl = sample_loss(tape, model, vc.input, vc.prior, sample);
        rec.occupancy += tape.value(sl.occupancy)(0, 0) / config.batch;
        rec.color += tape.value(sl.color)(0, 0) / config.batch;
        const ad::Var both = tape.add(sl.occupancy, sl.color);
        total = total.valid() ? tape.add(total, both) : both;
      }
      total = tape.scale(total, 1.0 / config.batch);
      if (!std::isfinite(tape.value(total)(0, 0))) throw NumericalError("non-finite loss");
      tape.backward(total);
      adam.step(model.store());
    } catch (const NumericalError& e) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + e.what(), step);
    }
    result.curve.push_back(rec);
    epoch_occ += rec.occupancy;
    epoch_col += rec.color;
    if (++epoch_steps == result.steps_per_epoch || step + 1 == result.steps) {
      if (log) log(static_cast<int>(step / result.steps_per_epoch), epoch_occ / epoch_steps, epoch_col / epoch_steps);
      epoch_occ = epoch_col = 0.0;
      epoch_steps = 0;
    }
  }
  return result;
}

std::string loss_curve_csv(const std::vector<LossRecord>& curve) {
  std::ostringstream os;
  os << "step,occupancy,color\n";
  for (const auto& r : curve)
    os << r.step << ',' << io::format_double(r.occupancy) << ',' << io::format_double(r.color) << '\n';
  return os.str();
}

}  // namespace sidefield::training
