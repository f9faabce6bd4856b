#include "sidefield/encoder/sideview_encoder.hpp"

#include <cmath>

#include "sidefield/core/error.hpp"

namespace sidefield::encoder {

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::paper() {
  EncoderConfig c;
  c.input_size = 512;
  c.patch = 16;
  c.width = 256;
  c.heads = 8;
  c.encoder_depth = 8;
  c.front_depth = 3;
  c.side_depth = 3;
  c.plane_size = 128;
  c.plane_channels = 32;
  return c;
}

void EncoderConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("encoder config: " + m); };
  if (input_size <= 0 || patch <= 0 || input_size % patch != 0) fail("input_size must be a positive multiple of patch");
  if (in_channels <= 0) fail("in_channels must be positive");
  if (width <= 0 || heads <= 0 || width % heads != 0) fail("width must be a positive multiple of heads");
  if (encoder_depth < 0 || front_depth < 0 || side_depth < 0) fail("depths must be >= 0");
  if (plane_size <= 0 || plane_size % grid() != 0) fail("plane_size must be a multiple of the token grid");
  if (plane_channels <= 0) fail("plane_channels must be positive");
  if (!(init_std > 0)) fail("init_std must be positive");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"input_size", input_size},       {"patch", patch},
          {"in_channels", in_channels},     {"width", width},
          {"heads", heads},                 {"encoder_depth", encoder_depth},
          {"front_depth", front_depth},     {"side_depth", side_depth},
          {"plane_size", plane_size},       {"plane_channels", plane_channels},
          {"init_std", init_std}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j, const EncoderConfig& base) {
  EncoderConfig c = base;
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "input_size") c.input_size = val.get<int>();
      else if (key == "patch") c.patch = val.get<int>();
      else if (key == "in_channels") c.in_channels = val.get<int>();
      else if (key == "width") c.width = val.get<int>();
      else if (key == "heads") c.heads = val.get<int>();
      else if (key == "encoder_depth") c.encoder_depth = val.get<int>();
      else if (key == "front_depth") c.front_depth = val.get<int>();
      else if (key == "side_depth") c.side_depth = val.get<int>();
      else if (key == "plane_size") c.plane_size = val.get<int>();
      else if (key == "plane_channels") c.plane_channels = val.get<int>();
      else if (key == "init_std") c.init_std = val.get<double>();
      else throw ConfigError("encoder config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

ad::Var attention(ad::Tape& tape, ad::Var queries, ad::Var keys_values, const AttentionVars& w, int heads) {
  const ad::Var q = tape.matmul(queries, w.query);
  const ad::Var k = tape.matmul(keys_values, w.key);
  const ad::Var v = tape.matmul(keys_values, w.value);
  const int width = static_cast<int>(tape.value(q).cols());
  if (width % heads != 0) throw ContractViolation("attention: width not divisible by heads");
  const int dh = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> outs;
  for (int h = 0; h < heads; ++h) {
    const ad::Var qh = tape.slice_cols(q, h * dh, dh);
    const ad::Var kh = tape.slice_cols(k, h * dh, dh);
    const ad::Var vh = tape.slice_cols(v, h * dh, dh);
    const ad::Var weights = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), scale));
    outs.push_back(tape.matmul(weights, vh));
  }
  const ad::Var merged = heads == 1 ? outs[0] : tape.concat_cols(outs);
  return tape.add_row(tape.matmul(merged, w.out), w.out_bias);
}

Matrix extract_patches(const Image& image, int patch) {
  if (patch <= 0 || image.height % patch != 0 || image.width % patch != 0)
    throw ContractViolation("extract_patches: image size not divisible by patch size");
  const int gy = image.height / patch, gx = image.width / patch;
  Matrix out(gy * gx, patch * patch * image.channels);
  for (int ty = 0; ty < gy; ++ty)
    for (int tx = 0; tx < gx; ++tx) {
      int col = 0;
      for (int py = 0; py < patch; ++py)
        for (int px = 0; px < patch; ++px)
          for (int c = 0; c < image.channels; ++c) out(ty * gx + tx, col++) = image.at(ty * patch + py, tx * patch + px, c);
    }
  return out;
}

std::vector<int> pixel_shuffle_index(int grid, int shuffle, int channels) {
  const int size = grid * shuffle;
  const int src_cols = shuffle * shuffle * channels;
  std::vector<int> src(static_cast<std::size_t>(size) * size * channels);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int token = (y / shuffle) * grid + (x / shuffle);
      const int sub = (y % shuffle) * shuffle + (x % shuffle);
      for (int c = 0; c < channels; ++c)
        src[(static_cast<std::size_t>(y) * size + x) * channels + c] = token * src_cols + sub * channels + c;
    }
  return src;
}

SideViewEncoder::BlockParams SideViewEncoder::make_block(const std::string& prefix, Rng& rng) {
  const int d = config_.width;
  const double s = config_.init_std;
  BlockParams b;
  b.query = &store_->add_normal(prefix + ".attn.query", d, d, s, rng);
  b.key = &store_->add_normal(prefix + ".attn.key", d, d, s, rng);
  b.value = &store_->add_normal(prefix + ".attn.value", d, d, s, rng);
  b.out = &store_->add_normal(prefix + ".attn.out", d, d, s, rng);
  b.out_bias = &store_->add(prefix + ".attn.out_bias", 1, d);
  b.ln1_gain = &store_->add(prefix + ".ln1.gain", 1, d);
  b.ln1_gain->value.setOnes();
  b.ln1_bias = &store_->add(prefix + ".ln1.bias", 1, d);
  b.ff1 = &store_->add_normal(prefix + ".ff1.weight", d, 4 * d, s, rng);
  b.ff1_bias = &store_->add(prefix + ".ff1.bias", 1, 4 * d);
  b.ff2 = &store_->add_normal(prefix + ".ff2.weight", 4 * d, d, s, rng);
  b.ff2_bias = &store_->add(prefix + ".ff2.bias", 1, d);
  b.ln2_gain = &store_->add(prefix + ".ln2.gain", 1, d);
  b.ln2_gain->value.setOnes();
  b.ln2_bias = &store_->add(prefix + ".ln2.bias", 1, d);
  return b;
}

SideViewEncoder::SideViewEncoder(const EncoderConfig& config, ad::ParameterStore& store, Rng& rng)
    : config_(config), store_(&store) {
  config_.validate();
  const int d = config_.width;
  const int t = config_.tokens();
  const double s = config_.init_std;
  const int proj_cols = config_.shuffle() * config_.shuffle() * config_.plane_channels;
  patch_w_ = &store.add_normal("enc.patch.weight", config_.patch * config_.patch * config_.in_channels, d, s, rng);
  patch_b_ = &store.add("enc.patch.bias", 1, d);
  pos_ = &store.add_normal("enc.pos", t, d, s, rng);
  for (int i = 0; i < config_.encoder_depth; ++i) encoder_blocks_.push_back(make_block("enc.block" + std::to_string(i), rng));
  for (int i = 0; i < config_.front_depth; ++i) front_blocks_.push_back(make_block("front.block" + std::to_string(i), rng));
  front_proj_ = &store.add_normal("front.proj.weight", d, proj_cols, s, rng);
  front_proj_b_ = &store.add("front.proj.bias", 1, proj_cols);
  for (int side = 0; side < 3; ++side) {
    const std::string prefix = kPlaneNames[side + 1];
    SideParams& sp = sides_[side];
    sp.embed_w = &store.add_normal(prefix + ".embed.weight", config_.patch * config_.patch * 3, d, s, rng);
    sp.embed_b = &store.add(prefix + ".embed.bias", 1, d);
    sp.pos = &store.add_normal(prefix + ".pos", t, d, s, rng);
    for (int i = 0; i < config_.side_depth; ++i) sp.blocks.push_back(make_block(prefix + ".block" + std::to_string(i), rng));
    sp.proj = &store.add_normal(prefix + ".proj.weight", d, proj_cols, s, rng);
    sp.proj_b = &store.add(prefix + ".proj.bias", 1, proj_cols);
  }
  shuffle_index_ = pixel_shuffle_index(config_.grid(), config_.shuffle(), config_.plane_channels);
}

ad::Var SideViewEncoder::patch_embed(ad::Tape& tape, const Image& input) const {
  if (input.height != config_.input_size || input.width != config_.input_size || input.channels != config_.in_channels)
    throw ContractViolation("patch_embed: expected a " + std::to_string(config_.input_size) + "x" +
                            std::to_string(config_.input_size) + "x" + std::to_string(config_.in_channels) + " input");
  const ad::Var patches = tape.constant(extract_patches(input, config_.patch));
  const ad::Var proj = tape.add_row(tape.matmul(patches, tape.parameter(*patch_w_)), tape.parameter(*patch_b_));
  return tape.add(proj, tape.parameter(*pos_));
}

ad::Var SideViewEncoder::block(ad::Tape& tape, ad::Var x, ad::Var kv, const BlockParams& b, bool self_attention) const {
  const AttentionVars w{tape.parameter(*b.query), tape.parameter(*b.key), tape.parameter(*b.value),
                        tape.parameter(*b.out), tape.parameter(*b.out_bias)};
  const ad::Var att = attention(tape, x, self_attention ? x : kv, w, config_.heads);
  const ad::Var x1 = tape.layer_norm(tape.add(x, att), tape.parameter(*b.ln1_gain), tape.parameter(*b.ln1_bias));
  const ad::Var hidden = tape.gelu(tape.add_row(tape.matmul(x1, tape.parameter(*b.ff1)), tape.parameter(*b.ff1_bias)));
  const ad::Var ff = tape.add_row(tape.matmul(hidden, tape.parameter(*b.ff2)), tape.parameter(*b.ff2_bias));
  return tape.layer_norm(tape.add(x1, ff), tape.parameter(*b.ln2_gain), tape.parameter(*b.ln2_bias));
}

ad::Var SideViewEncoder::global_encode(ad::Tape& tape, ad::Var tokens) const {
  if (tape.value(tokens).rows() != config_.tokens() || tape.value(tokens).cols() != config_.width)
    throw ContractViolation("global_encode: token grid does not match the config");
  ad::Var x = tokens;
  for (const auto& b : encoder_blocks_) x = block(tape, x, x, b, true);
  return x;
}

ad::Var SideViewEncoder::to_plane(ad::Tape& tape, ad::Var tokens, ad::Parameter* proj, ad::Parameter* proj_b) const {
  const ad::Var p = tape.add_row(tape.matmul(tokens, tape.parameter(*proj)), tape.parameter(*proj_b));
  const int size = config_.plane_size;
  return tape.remap(p, size * size, config_.plane_channels, shuffle_index_);
}

ad::Var SideViewEncoder::decode_front(ad::Tape& tape, ad::Var latent) const {
  ad::Var x = latent;
  for (const auto& b : front_blocks_) x = block(tape, x, x, b, true);
  return to_plane(tape, x, front_proj_, front_proj_b_);
}

ad::Var SideViewEncoder::decode_side(ad::Tape& tape, ad::Var latent, const Image& normal, Plane side) const {
  if (side == Plane::kFront) throw ContractViolation("decode_side: front is not a side view");
  if (normal.height != config_.input_size || normal.width != config_.input_size || normal.channels != 3)
    throw ContractViolation("decode_side: normal image must match the input resolution with 3 channels");
  if (tape.value(latent).rows() != config_.tokens()) throw ContractViolation("decode_side: latent token grid mismatch");
  const SideParams& sp = sides_[static_cast<int>(side) - 1];
  const ad::Var patches = tape.constant(extract_patches(normal, config_.patch));
  ad::Var z = tape.add(tape.add_row(tape.matmul(patches, tape.parameter(*sp.embed_w)), tape.parameter(*sp.embed_b)),
                       tape.parameter(*sp.pos));
  for (const auto& b : sp.blocks) z = block(tape, z, latent, b, false);
  return to_plane(tape, z, sp.proj, sp.proj_b);
}

PlaneVars SideViewEncoder::forward(ad::Tape& tape, const Image& input,
                                   const std::array<const Image*, 3>& side_normals) const {
  const ad::Var h = global_encode(tape, patch_embed(tape, input));
  PlaneVars out;
  out.planes[0] = decode_front(tape, h);
  for (int s = 0; s < 3; ++s) {
    if (!side_normals[s]) throw ContractViolation("forward: missing side normal image");
    out.planes[s + 1] = decode_side(tape, h, *side_normals[s], static_cast<Plane>(s + 1));
  }
  return out;
}

}  // namespace sidefield::encoder
