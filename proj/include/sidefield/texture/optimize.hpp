#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidefield/geom/mesh.hpp"
#include "sidefield/texture/losses.hpp"
#include "sidefield/texture/refiner.hpp"
#include "sidefield/texture/render.hpp"
#include "sidefield/texture/texture_map.hpp"

namespace sidefield::texture {

struct LossWeights {
  double mse = 1.0;
  double perceptual = 1e-4;
  double chamfer = 1e-2;
  double front = 1.0;
};

struct RefineConfig {
  LossWeights weights;
  double sweep_start = 150.0;
  double sweep_end = 210.0;  // exclusive
  double sweep_step = 2.0;
  int view_resolution = 128;
  UvConfig uv;
  std::vector<int> key_views;  // empty: every view is refined independently
  std::string prompt;
  double learning_rate = 0.1;
  int steps = 400;
  int refresh_interval = 100;  // re-render and re-refine targets; 0 keeps the first targets
  int chamfer_points = 4096;
  std::uint64_t seed = 0;

  static RefineConfig desk() { return {}; }
  static RefineConfig paper();
  std::vector<geom::Camera> sweep() const;
  void validate() const;
  nlohmann::json to_json() const;
  static RefineConfig from_json(const nlohmann::json& j, RefineConfig base);
};

struct ObjectiveTerms {
  double mse = 0.0;
  double perceptual = 0.0;
  double chamfer = 0.0;
  double front = 0.0;
  double total = 0.0;
};

/// Fixed-geometry objective over a sweep of views plus the front view.
/// Gradients are with respect to the (R*R) x 3 texel matrix.
class TextureObjective {
 public:
  TextureObjective(const geom::TriMesh& mesh, const TextureMap& layout, const Image& input_rgb,
                   const RefineConfig& config, std::shared_ptr<const PerceptualLoss> perceptual = nullptr);

  const std::vector<RenderOperator>& sweep_ops() const { return ops_; }
  const RenderOperator& front_op() const { return front_; }
  /// Texels that any view (sweep or front) samples with nonzero weight.
  const std::vector<char>& covered() const { return covered_; }

  void set_targets(std::vector<ViewImage> targets);
  const std::vector<ViewImage>& targets() const { return targets_; }
  std::vector<ViewImage> render(const Matrix& texels) const;

  /// Fills grad (same shape as texels) when non-null.
  ObjectiveTerms evaluate(const Matrix& texels, Matrix* grad) const;

 private:
  RefineConfig config_;
  std::shared_ptr<const PerceptualLoss> perceptual_;
  std::vector<RenderOperator> ops_;
  RenderOperator front_;
  Matrix input_;  // input image restricted to the rendered front foreground
  std::vector<Vec3> input_pixels_;
  std::vector<char> covered_;
  std::vector<ViewImage> targets_;
  std::vector<Matrix> target_mats_;
};

/// Refined targets for the given views: every view through the refiner, or,
/// with key views set, only the key views, the rest propagated from them via
/// nearest-neighbour fields on patch descriptors of the source views.
std::vector<ViewImage> make_targets(Refiner& refiner, const RefineConfig& config, const std::vector<ViewImage>& views);

struct RefineResult {
  TextureMap texture;
  std::vector<ObjectiveTerms> history;  // objective before each step
  int best_step = 0;
  int covered_texels = 0;
  std::vector<ViewImage> targets;
};

using RefineLogger = std::function<void(int step, const ObjectiveTerms&)>;

/// Adam on covered texels (clamped to [0,1]); uncovered texels keep their
/// initial values. The first targets come from source_views when given,
/// otherwise from renders of the initial texture. Returns the texture with
/// the lowest objective seen. Throws DivergenceError on a non-finite objective.
RefineResult optimize_texture(const TextureMap& initial, const geom::TriMesh& mesh, const Image& input_rgb,
                              const RefineConfig& config, Refiner& refiner,
                              const std::vector<ViewImage>* source_views = nullptr, const RefineLogger& log = {});

/// PSNR between two textures over texels where mask is set.
double texture_psnr(const TextureMap& a, const TextureMap& b, const std::vector<char>& mask);

}  // namespace sidefield::texture
