#include "sidefield/texture/captioner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"

namespace sidefield::texture {

namespace {

std::string image_bytes(const Image& rgb) {
  std::string bytes;
  bytes.reserve(rgb.data.size());
  for (double v : rgb.data)
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  return bytes;
}

}  // namespace

std::string MockCaptioner::describe(const Image& rgb) {
  static constexpr std::array<const char*, 6> kCaptions = {
      "a person in a striped shirt and dark trousers",
      "a person wearing a loose top and long pants",
      "a standing person in casual clothes",
      "a person in a short-sleeved shirt and jeans",
      "a person wearing a plain sweater and sneakers",
      "a person in work clothes and boots",
  };
  return kCaptions[fnv1a(image_bytes(rgb)) % kCaptions.size()];
}

HttpCaptioner::HttpCaptioner(ServiceEndpoint endpoint, std::string model, RetryPolicy policy)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), policy_(std::move(policy)) {}

nlohmann::json HttpCaptioner::request_body(const Image& rgb) const {
  const auto png = encode_png(rgb);
  const std::string data_url =
      "data:image/png;base64," + io::base64_encode(std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
  return {{"model", model_},
          {"max_tokens", 60},
          {"messages",
           {{{"role", "user"},
             {"content",
              {{{"type", "text"}, {"text", "Describe the person in this picture in one short English phrase."}},
               {{"type", "image_url"}, {"image_url", {{"url", data_url}}}}}}}}}};
}

std::string HttpCaptioner::describe(const Image& rgb) {
  const nlohmann::json reply = post_json(endpoint_, request_body(rgb), policy_);
  try {
    std::string text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    while (!text.empty() && (text.back() == '.' || text.back() == '\n' || text.back() == ' ')) text.pop_back();
    if (text.empty()) throw ExternalServiceError("captioning service returned an empty caption", false);
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw ExternalServiceError(std::string("unexpected captioning reply: ") + e.what(), false);
  }
}

std::unique_ptr<Captioner> captioner_from_env() {
  if (auto ep = ServiceEndpoint::from_env("SIDEFIELD_CAPTION")) {
    const char* model = std::getenv("SIDEFIELD_CAPTION_MODEL");
    return std::make_unique<HttpCaptioner>(*ep, model && *model ? model : "gpt-4o-mini");
  }
  return std::make_unique<MockCaptioner>();
}

std::string back_view_prompt(const std::string& caption) { return "the back side of " + caption + ", realistic, vivid"; }

std::string image_to_text(const Image& rgb, Captioner& captioner) { return back_view_prompt(captioner.describe(rgb)); }

}  // namespace sidefield::texture
