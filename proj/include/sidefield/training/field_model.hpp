#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>

#include "json.hpp"
#include "sidefield/ad/parameters.hpp"
#include "sidefield/body/body_model.hpp"
#include "sidefield/encoder/sideview_encoder.hpp"
#include "sidefield/fusion/prior_fusion.hpp"

namespace sidefield::training {

struct ModelConfig {
  encoder::EncoderConfig encoder = encoder::EncoderConfig::desk();
  fusion::HeadConfig heads = fusion::HeadConfig::desk();
  fusion::QueryMode mode = fusion::QueryMode::kHybrid;
  std::uint64_t init_seed = 7;

  static ModelConfig desk();
  static ModelConfig paper();
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j, const ModelConfig& base);
};

/// Body-prior inputs for one input view, with the body already rotated into
/// the view frame (the input camera becomes the front camera).
struct ViewPrior {
  fusion::PriorContext context;
  std::array<Image, 3> side_normals;  // left, back, right body renders
};

/// Renders at the encoder input size and indexes the body for plane_size planes.
ViewPrior make_view_prior(const geom::TriMesh& body_in_view, const ModelConfig& config);

/// Body mesh for the given parameters rotated into the frame of a camera with this yaw.
geom::TriMesh body_in_view(const body::BodyParams& params, double yaw_deg);

/// Encoder plus field heads sharing one parameter store.
class FieldModel {
 public:
  explicit FieldModel(const ModelConfig& config);
  FieldModel(const FieldModel&) = delete;
  FieldModel& operator=(const FieldModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ad::ParameterStore& store() { return store_; }
  const ad::ParameterStore& store() const { return store_; }
  const encoder::SideViewEncoder& encoder() const { return *encoder_; }
  const fusion::FieldHeads& heads() const { return *heads_; }

  encoder::PlaneVars planes(ad::Tape& tape, const Image& input, const ViewPrior& prior) const;

  /// Writes <stem>.bin / <stem>.json; the model config is stored under "model".
  void save(const std::filesystem::path& stem, const nlohmann::json& extra = nlohmann::json::object()) const;
  static std::unique_ptr<FieldModel> load(const std::filesystem::path& stem);

 private:
  ModelConfig config_;
  ad::ParameterStore store_;
  std::unique_ptr<encoder::SideViewEncoder> encoder_;
  std::unique_ptr<fusion::FieldHeads> heads_;
};

/// A trained field conditioned on one input view, for dense evaluation.
/// Planes are computed once; queries run in fixed blocks of kBlockRows rows
/// (zero padded) so a point's value does not depend on how callers chunk
/// their batches. Safe to call concurrently.
class ImplicitField {
 public:
  static constexpr int kBlockRows = 256;

  ImplicitField(const FieldModel& model, const Image& input, ViewPrior prior);

  void occupancy(std::span<const Vec3> points, std::span<double> out) const;
  void color(std::span<const Vec3> points, std::span<Vec3> out) const;

  const ViewPrior& prior() const { return prior_; }
  const std::array<Matrix, 4>& plane_values() const { return planes_; }

 private:
  template <typename Fn>
  void for_blocks(std::span<const Vec3> points, Fn&& fn) const;

  const FieldModel* model_;
  ViewPrior prior_;
  std::array<Matrix, 4> planes_;
};

}  // namespace sidefield::training
