#pragma once

#include <memory>
#include <string>

#include "sidefield/core/image.hpp"
#include "sidefield/texture/service.hpp"

namespace sidefield::texture {

class Captioner {
 public:
  virtual ~Captioner() = default;
  /// Short description of the person in the image.
  virtual std::string describe(const Image& rgb) = 0;
};

/// Offline default: a canned caption chosen by a hash of the 8-bit image.
class MockCaptioner final : public Captioner {
 public:
  std::string describe(const Image& rgb) override;
};

/// Chat-completions style vision endpoint. The reply text is read from
/// choices[0].message.content.
class HttpCaptioner final : public Captioner {
 public:
  HttpCaptioner(ServiceEndpoint endpoint, std::string model, RetryPolicy policy = {});
  std::string describe(const Image& rgb) override;
  nlohmann::json request_body(const Image& rgb) const;

 private:
  ServiceEndpoint endpoint_;
  std::string model_;
  RetryPolicy policy_;
};

/// HttpCaptioner when SIDEFIELD_CAPTION_URL is set (model from
/// SIDEFIELD_CAPTION_MODEL), otherwise the mock.
std::unique_ptr<Captioner> captioner_from_env();

std::string back_view_prompt(const std::string& caption);

/// Caption wrapped into the back-view prompt.
std::string image_to_text(const Image& rgb, Captioner& captioner);

}  // namespace sidefield::texture
