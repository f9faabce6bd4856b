#include "sidefield/training/field_model.hpp"

#include "sidefield/body/normal_render.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/geom/camera.hpp"

namespace sidefield::training {

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.encoder = encoder::EncoderConfig::paper();
  c.heads = fusion::HeadConfig::paper();
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder", encoder.to_json()},
          {"heads", heads.to_json()},
          {"query_mode", fusion::to_string(mode)},
          {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j, const ModelConfig& base) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  ModelConfig c = base;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "encoder") c.encoder = encoder::EncoderConfig::from_json(value, c.encoder);
      else if (key == "heads") c.heads = fusion::HeadConfig::from_json(value, c.heads);
      else if (key == "query_mode") c.mode = fusion::parse_query_mode(value.get<std::string>());
      else if (key == "init_seed") c.init_seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown model config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

geom::TriMesh body_in_view(const body::BodyParams& params, double yaw_deg) {
  const geom::TriMesh mesh = body::build_body(params).mesh;
  if (yaw_deg == 0.0) return mesh;
  return geom::transformed(mesh, geom::yaw_rotation(yaw_deg), Vec3::Zero());
}

ViewPrior make_view_prior(const geom::TriMesh& body_in_view, const ModelConfig& config) {
  const int res = config.encoder.input_size;
  ViewPrior vp{fusion::make_prior_context(body_in_view, config.encoder.plane_size, res), {}};
  const auto cams = geom::canonical_cameras(res);
  for (int k = 0; k < 3; ++k) vp.side_normals[k] = body::render_normal_map(body_in_view, cams[k + 1]).pixels;
  return vp;
}

FieldModel::FieldModel(const ModelConfig& config) : config_(config) {
  config_.encoder.validate();
  Rng rng(config_.init_seed);
  encoder_ = std::make_unique<encoder::SideViewEncoder>(config_.encoder, store_, rng);
  heads_ = std::make_unique<fusion::FieldHeads>(
      config_.heads, fusion::fused_width(config_.encoder.plane_channels, config_.mode), store_, rng);
}

encoder::PlaneVars FieldModel::planes(ad::Tape& tape, const Image& input, const ViewPrior& prior) const {
  return encoder_->forward(tape, input,
                           {&prior.side_normals[0], &prior.side_normals[1], &prior.side_normals[2]});
}

void FieldModel::save(const std::filesystem::path& stem, const nlohmann::json& extra) const {
  nlohmann::json cfg = extra;
  cfg["model"] = config_.to_json();
  ad::save_checkpoint(stem, store_, cfg);
}

std::unique_ptr<FieldModel> FieldModel::load(const std::filesystem::path& stem) {
  const nlohmann::json cfg = ad::read_checkpoint_config(stem);
  if (!cfg.contains("model")) throw ConfigError("checkpoint has no model config: " + stem.string());
  auto model = std::make_unique<FieldModel>(ModelConfig::from_json(cfg["model"], ModelConfig::desk()));
  ad::load_checkpoint(stem, model->store_);
  return model;
}

ImplicitField::ImplicitField(const FieldModel& model, const Image& input, ViewPrior prior)
    : model_(&model), prior_(std::move(prior)) {
  ad::Tape tape(false);
  const encoder::PlaneVars pv = model.planes(tape, input, prior_);
  for (int k = 0; k < 4; ++k) planes_[k] = tape.value(pv.planes[k]);
}

template <typename Fn>
void ImplicitField::for_blocks(std::span<const Vec3> points, Fn&& fn) const {
  std::vector<Vec3> block(kBlockRows);
  for (std::size_t start = 0; start < points.size(); start += kBlockRows) {
    const std::size_t m = std::min<std::size_t>(kBlockRows, points.size() - start);
    std::copy(points.begin() + start, points.begin() + start + m, block.begin());
    std::fill(block.begin() + m, block.end(), Vec3::Zero());
    const auto batch = fusion::prepare_queries(prior_.context, block, model_->config().mode);
    ad::Tape tape(false);
    encoder::PlaneVars pv;
    for (int k = 0; k < 4; ++k) pv.planes[k] = tape.constant(planes_[k]);
    const ad::Var fused = fusion::fused_features(tape, pv, batch, model_->config().mode);
    fn(tape, fused, start, m);
  }
}

void ImplicitField::occupancy(std::span<const Vec3> points, std::span<double> out) const {
  if (out.size() != points.size()) throw ContractViolation("ImplicitField::occupancy: output size mismatch");
  for_blocks(points, [&](ad::Tape& tape, ad::Var fused, std::size_t start, std::size_t m) {
    const Matrix& occ = tape.value(model_->heads().occupancy(tape, fused));
    for (std::size_t i = 0; i < m; ++i) out[start + i] = occ(static_cast<Eigen::Index>(i), 0);
  });
}

void ImplicitField::color(std::span<const Vec3> points, std::span<Vec3> out) const {
  if (out.size() != points.size()) throw ContractViolation("ImplicitField::color: output size mismatch");
  for_blocks(points, [&](ad::Tape& tape, ad::Var fused, std::size_t start, std::size_t m) {
    const Matrix& col = tape.value(model_->heads().color(tape, fused));
    for (std::size_t i = 0; i < m; ++i) out[start + i] = col.row(static_cast<Eigen::Index>(i)).transpose();
  });
}

}  // namespace sidefield::training
