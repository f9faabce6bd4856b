#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sidefield/texture/render.hpp"
#include "sidefield/texture/service.hpp"

namespace sidefield::texture {

/// Maps rendered views plus a prompt to refined views of the same count and
/// resolution.
class Refiner {
 public:
  virtual ~Refiner() = default;
  virtual std::string name() const = 0;
  virtual std::vector<ViewImage> refine(const std::vector<ViewImage>& views, const std::string& prompt) = 0;
};

class IdentityRefiner final : public Refiner {
 public:
  std::string name() const override { return "identity"; }
  std::vector<ViewImage> refine(const std::vector<ViewImage>& views, const std::string& prompt) override;
};

/// Per-pixel color transform J = clamp(M c) with M a rotation about the gray
/// axis; by default M is derived from a hash of the prompt.
class RotateRefiner final : public Refiner {
 public:
  RotateRefiner() = default;
  explicit RotateRefiner(const Mat3& fixed) : fixed_(fixed), has_fixed_(true) {}
  std::string name() const override { return "rotate"; }
  std::vector<ViewImage> refine(const std::vector<ViewImage>& views, const std::string& prompt) override;

  static Mat3 prompt_rotation(const std::string& prompt);

 private:
  Mat3 fixed_ = Mat3::Identity();
  bool has_fixed_ = false;
};

/// Replays views stored with save_view_fixture, in order.
class FixtureRefiner final : public Refiner {
 public:
  explicit FixtureRefiner(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string name() const override { return "fixture"; }
  std::vector<ViewImage> refine(const std::vector<ViewImage>& views, const std::string& prompt) override;

 private:
  std::filesystem::path dir_;
};

/// Remote backend. Request: {"prompt", "views": [{"yaw", "png"}]} with base64
/// PNGs; reply: {"views": [base64 PNG, ...]}. Endpoint from
/// SIDEFIELD_REFINER_URL / SIDEFIELD_REFINER_API_KEY.
class ExternalRefiner final : public Refiner {
 public:
  ExternalRefiner(ServiceEndpoint endpoint, RetryPolicy policy = {});
  std::string name() const override { return "external"; }
  std::vector<ViewImage> refine(const std::vector<ViewImage>& views, const std::string& prompt) override;

 private:
  ServiceEndpoint endpoint_;
  RetryPolicy policy_;
};

/// identity | rotate | fixture (needs fixture_dir) | external.
std::unique_ptr<Refiner> make_refiner(const std::string& kind, const std::filesystem::path& fixture_dir = {});

/// Runs the refiner and checks the output contract (count and resolution).
/// Output masks are taken from the inputs and background pixels zeroed.
std::vector<ViewImage> refine_views(Refiner& refiner, const std::string& prompt, const std::vector<ViewImage>& views);

/// view_NNN.sfimg (lossless RGB) and view_NNN.mask.png per view.
void save_view_fixture(const std::filesystem::path& dir, const std::vector<ViewImage>& views);

}  // namespace sidefield::texture
