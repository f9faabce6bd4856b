#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidefield/ad/parameters.hpp"
#include "sidefield/ad/tape.hpp"
#include "sidefield/core/image.hpp"
#include "sidefield/core/rng.hpp"

namespace sidefield::encoder {

struct EncoderConfig {
  int input_size = 64;
  int patch = 8;
  int in_channels = 9;  // RGB + front normal + back normal
  int width = 64;
  int heads = 4;
  int encoder_depth = 2;
  int front_depth = 1;
  int side_depth = 1;
  int plane_size = 16;
  int plane_channels = 16;
  double init_std = 0.02;

  static EncoderConfig desk();
  static EncoderConfig paper();

  int grid() const { return input_size / patch; }
  int tokens() const { return grid() * grid(); }
  int head_dim() const { return width / heads; }
  int shuffle() const { return plane_size / grid(); }
  /// Throws ConfigError on inconsistent dimensions.
  void validate() const;

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j, const EncoderConfig& base);
};

enum class Plane : int { kFront = 0, kLeft = 1, kBack = 2, kRight = 3 };
inline constexpr std::array<const char*, 4> kPlaneNames = {"front", "left", "back", "right"};

/// Four planes on a tape. Each is (plane_size^2) x plane_channels with pixel
/// (y, x) at row y * plane_size + x.
struct PlaneVars {
  std::array<ad::Var, 4> planes;
};

/// Parameters of one attention sub-layer.
struct AttentionVars {
  ad::Var query;   // D x D, no bias
  ad::Var key;
  ad::Var value;
  ad::Var out;     // D x D
  ad::Var out_bias;
};

/// Multi-head scaled dot-product attention: per head
/// softmax(Q_h K_h^T / sqrt(D / heads)) V_h, heads concatenated, then the
/// output projection.
ad::Var attention(ad::Tape& tape, ad::Var queries, ad::Var keys_values, const AttentionVars& w, int heads);

/// Non-overlapping patches as rows; within a patch the order is (row, col,
/// channel). Throws ContractViolation if the size is not divisible.
Matrix extract_patches(const Image& image, int patch);

/// Row-major token grid to a plane grid: token (gy, gx) with channel
/// (sy * r + sx) * C + c lands at pixel (gy * r + sy, gx * r + sx), channel c.
std::vector<int> pixel_shuffle_index(int grid, int shuffle, int channels);

/// Side-view decoupling transformer. Parameters are registered in the given
/// store under "enc.", "front.", "left.", "back." and "right." prefixes.
class SideViewEncoder {
 public:
  SideViewEncoder(const EncoderConfig& config, ad::ParameterStore& store, Rng& init_rng);

  const EncoderConfig& config() const { return config_; }

  /// Patch embedding plus positional embedding of the 9-channel input.
  ad::Var patch_embed(ad::Tape& tape, const Image& input) const;
  /// Self-attention encoder stack producing latent tokens h.
  ad::Var global_encode(ad::Tape& tape, ad::Var tokens) const;
  ad::Var decode_front(ad::Tape& tape, ad::Var latent) const;
  /// Cross-attention decoder: the normal embedding queries h.
  ad::Var decode_side(ad::Tape& tape, ad::Var latent, const Image& normal, Plane side) const;

  /// Full pass. side_normals holds the left, back and right normal renders.
  PlaneVars forward(ad::Tape& tape, const Image& input, const std::array<const Image*, 3>& side_normals) const;

 private:
  struct BlockParams {
    ad::Parameter* query;
    ad::Parameter* key;
    ad::Parameter* value;
    ad::Parameter* out;
    ad::Parameter* out_bias;
    ad::Parameter* ln1_gain;
    ad::Parameter* ln1_bias;
    ad::Parameter* ff1;
    ad::Parameter* ff1_bias;
    ad::Parameter* ff2;
    ad::Parameter* ff2_bias;
    ad::Parameter* ln2_gain;
    ad::Parameter* ln2_bias;
  };

  BlockParams make_block(const std::string& prefix, Rng& rng);
  ad::Var block(ad::Tape& tape, ad::Var x, ad::Var kv, const BlockParams& b, bool self_attention) const;
  ad::Var to_plane(ad::Tape& tape, ad::Var tokens, ad::Parameter* proj, ad::Parameter* proj_bias) const;

  EncoderConfig config_;
  ad::ParameterStore* store_;
  ad::Parameter* patch_w_;
  ad::Parameter* patch_b_;
  ad::Parameter* pos_;
  std::vector<BlockParams> encoder_blocks_;
  std::vector<BlockParams> front_blocks_;
  ad::Parameter* front_proj_;
  ad::Parameter* front_proj_b_;
  struct SideParams {
    ad::Parameter* embed_w;
    ad::Parameter* embed_b;
    ad::Parameter* pos;
    std::vector<BlockParams> blocks;
    ad::Parameter* proj;
    ad::Parameter* proj_b;
  };
  std::array<SideParams, 3> sides_;
  std::vector<int> shuffle_index_;
};

}  // namespace sidefield::encoder
