#include "sidefield/texture/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"

namespace sidefield::texture {

namespace {

std::string view_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu", i);
  return buf;
}

std::string base64_decode(std::string_view in) {
  static const std::string chars = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  int val = 0, bits = -8;
  for (char c : in) {
    if (c == '=') break;
    const auto pos = chars.find(c);
    if (pos == std::string::npos) throw ExternalServiceError("invalid base64 in refiner reply", false);
    val = (val << 6) + static_cast<int>(pos);
    bits += 6;
    if (bits >= 0) {
      out.push_back(static_cast<char>((val >> bits) & 0xFF));
      bits -= 8;
    }
  }
  return out;
}

}  // namespace

std::vector<ViewImage> IdentityRefiner::refine(const std::vector<ViewImage>& views, const std::string&) { return views; }

Mat3 RotateRefiner::prompt_rotation(const std::string& prompt) {
  const double deg = static_cast<double>(fnv1a(prompt) % 3600) / 10.0;
  return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, Vec3::Ones().normalized()).toRotationMatrix();
}

std::vector<ViewImage> RotateRefiner::refine(const std::vector<ViewImage>& views, const std::string& prompt) {
  const Mat3 m = has_fixed_ ? fixed_ : prompt_rotation(prompt);
  std::vector<ViewImage> out = views;
  for (auto& v : out)
    for (std::size_t p = 0; p < v.rgb.pixel_count(); ++p) {
      double* px = &v.rgb.data[3 * p];
      const Vec3 c = m * Vec3(px[0], px[1], px[2]);
      for (int k = 0; k < 3; ++k) px[k] = std::clamp(c[k], 0.0, 1.0);
    }
  return out;
}

std::vector<ViewImage> FixtureRefiner::refine(const std::vector<ViewImage>& views, const std::string&) {
  std::vector<ViewImage> out(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto path = dir_ / (view_stem(i) + ".sfimg");
    if (!std::filesystem::exists(path)) throw ContractViolation("fixture refiner: missing " + path.string());
    out[i].rgb = read_float_image(path);
    out[i].mask = views[i].mask;
    out[i].camera = views[i].camera;
  }
  return out;
}

ExternalRefiner::ExternalRefiner(ServiceEndpoint endpoint, RetryPolicy policy)
    : endpoint_(std::move(endpoint)), policy_(std::move(policy)) {}

std::vector<ViewImage> ExternalRefiner::refine(const std::vector<ViewImage>& views, const std::string& prompt) {
  nlohmann::json req = {{"prompt", prompt}, {"views", nlohmann::json::array()}};
  for (const auto& v : views) {
    const auto png = encode_png(v.rgb);
    req["views"].push_back(
        {{"yaw", v.camera.yaw_deg},
         {"png", io::base64_encode(std::string_view(reinterpret_cast<const char*>(png.data()), png.size()))}});
  }
  const nlohmann::json reply = post_json(endpoint_, req, policy_);
  std::vector<ViewImage> out;
  try {
    for (const auto& item : reply.at("views")) {
      const std::string bytes = base64_decode(item.get<std::string>());
      ViewImage v;
      v.rgb = decode_png(bytes);
      out.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ExternalServiceError(std::string("unexpected refiner reply: ") + e.what(), false);
  }
  for (std::size_t i = 0; i < out.size() && i < views.size(); ++i) out[i].camera = views[i].camera;
  return out;
}

std::unique_ptr<Refiner> make_refiner(const std::string& kind, const std::filesystem::path& fixture_dir) {
  if (kind == "identity") return std::make_unique<IdentityRefiner>();
  if (kind == "rotate") return std::make_unique<RotateRefiner>();
  if (kind == "fixture") {
    if (fixture_dir.empty()) throw ConfigError("fixture refiner needs a fixture directory");
    return std::make_unique<FixtureRefiner>(fixture_dir);
  }
  if (kind == "external") {
    auto ep = ServiceEndpoint::from_env("SIDEFIELD_REFINER");
    if (!ep) throw ConfigError("external refiner needs SIDEFIELD_REFINER_URL");
    return std::make_unique<ExternalRefiner>(*ep);
  }
  throw ConfigError("unknown refiner: " + kind);
}

std::vector<ViewImage> refine_views(Refiner& refiner, const std::string& prompt, const std::vector<ViewImage>& views) {
  std::vector<ViewImage> out = refiner.refine(views, prompt);
  if (out.size() != views.size())
    throw ContractViolation("refiner '" + refiner.name() + "' returned " + std::to_string(out.size()) + " views for " +
                            std::to_string(views.size()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].rgb.same_shape(views[i].rgb))
      throw ContractViolation("refiner '" + refiner.name() + "' changed the resolution of view " + std::to_string(i));
    out[i].mask = views[i].mask;
    out[i].camera = views[i].camera;
    for (std::size_t p = 0; p < out[i].mask.size(); ++p)
      if (!out[i].mask[p])
        for (int c = 0; c < 3; ++c) out[i].rgb.data[3 * p + c] = 0.0;
  }
  return out;
}

void save_view_fixture(const std::filesystem::path& dir, const std::vector<ViewImage>& views) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < views.size(); ++i) {
    write_float_image(dir / (view_stem(i) + ".sfimg"), views[i].rgb);
    Image m(views[i].rgb.height, views[i].rgb.width, 1);
    for (std::size_t p = 0; p < views[i].mask.size(); ++p) m.data[p] = views[i].mask[p] ? 1.0 : 0.0;
    write_png(dir / (view_stem(i) + ".mask.png"), m);
  }
}

}  // namespace sidefield::texture
