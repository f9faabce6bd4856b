#include "sidefield/texture/optimize.hpp"

#include <cmath>
#include <limits>

#include "sidefield/ad/parameters.hpp"
#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"
#include "sidefield/texture/consistent_edit.hpp"

namespace sidefield::texture {

RefineConfig RefineConfig::paper() {
  RefineConfig c;
  c.view_resolution = 512;
  c.uv = UvConfig::paper();
  return c;
}

std::vector<geom::Camera> RefineConfig::sweep() const {
  return geom::yaw_sweep(sweep_start, sweep_end, sweep_step, view_resolution);
}

void RefineConfig::validate() const {
  const LossWeights& w = weights;
  if (w.mse < 0 || w.perceptual < 0 || w.chamfer < 0 || w.front < 0) throw ConfigError("loss weights must be >= 0");
  if (!(sweep_step > 0.0) || !(sweep_end > sweep_start)) throw ConfigError("refinement sweep is empty");
  if (view_resolution < 4) throw ConfigError("view resolution must be >= 4");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (steps < 0 || refresh_interval < 0 || chamfer_points < 1) throw ConfigError("invalid refinement schedule");
  const int n = static_cast<int>(sweep().size());
  for (std::size_t k = 0; k < key_views.size(); ++k) {
    if (key_views[k] < 0 || key_views[k] >= n) throw ConfigError("key view index outside the sweep");
    if (k > 0 && key_views[k] <= key_views[k - 1]) throw ConfigError("key views must be sorted and distinct");
  }
  if (key_views.size() == 1) throw ConfigError("consistent editing needs at least two key views");
}

nlohmann::json RefineConfig::to_json() const {
  return {{"weights",
           {{"mse", weights.mse}, {"perceptual", weights.perceptual}, {"chamfer", weights.chamfer}, {"front", weights.front}}},
          {"sweep", {sweep_start, sweep_end, sweep_step}},
          {"view_resolution", view_resolution},
          {"uv", uv.to_json()},
          {"key_views", key_views},
          {"prompt", prompt},
          {"learning_rate", learning_rate},
          {"steps", steps},
          {"refresh_interval", refresh_interval},
          {"chamfer_points", chamfer_points},
          {"seed", seed}};
}

RefineConfig RefineConfig::from_json(const nlohmann::json& j, RefineConfig c) {
  if (!j.is_object()) throw ConfigError("refinement config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "weights") {
        for (const auto& [wk, wv] : value.items()) {
          if (wk == "mse") c.weights.mse = wv.get<double>();
          else if (wk == "perceptual") c.weights.perceptual = wv.get<double>();
          else if (wk == "chamfer") c.weights.chamfer = wv.get<double>();
          else if (wk == "front") c.weights.front = wv.get<double>();
          else throw ConfigError("unknown loss weight: " + wk);
        }
      } else if (key == "sweep") {
        if (!value.is_array() || value.size() != 3) throw ConfigError("sweep must be [start, end, step]");
        c.sweep_start = value[0].get<double>();
        c.sweep_end = value[1].get<double>();
        c.sweep_step = value[2].get<double>();
      } else if (key == "view_resolution") c.view_resolution = value.get<int>();
      else if (key == "uv") c.uv = UvConfig::from_json(value, c.uv);
      else if (key == "key_views") c.key_views = value.get<std::vector<int>>();
      else if (key == "prompt") c.prompt = value.get<std::string>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "steps") c.steps = value.get<int>();
      else if (key == "refresh_interval") c.refresh_interval = value.get<int>();
      else if (key == "chamfer_points") c.chamfer_points = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown refinement config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("refinement config: ") + e.what());
  }
  c.validate();
  return c;
}

TextureObjective::TextureObjective(const geom::TriMesh& mesh, const TextureMap& layout, const Image& input_rgb,
                                   const RefineConfig& config, std::shared_ptr<const PerceptualLoss> perceptual)
    : config_(config), perceptual_(perceptual ? std::move(perceptual) : std::make_shared<PatchStatsLoss>()) {
  config.validate();
  if (input_rgb.channels != 3 || input_rgb.height != input_rgb.width || input_rgb.height < 1)
    throw ContractViolation("refine: input image must be square RGB");
  ops_ = make_render_operators(mesh, layout, config.sweep());
  geom::Camera front_cam;
  front_cam.resolution = input_rgb.width;
  front_ = make_render_operator(mesh, layout, front_cam);
  if (front_.weights.nonZeros() == 0) throw ContractViolation("refine: mesh is not visible from the front camera");
  input_ = Matrix::Zero(static_cast<Eigen::Index>(front_.mask.size()), 3);
  for (std::size_t p = 0; p < front_.mask.size(); ++p) {
    if (!front_.mask[p]) continue;
    const Vec3 c(input_rgb.data[3 * p], input_rgb.data[3 * p + 1], input_rgb.data[3 * p + 2]);
    input_.row(static_cast<Eigen::Index>(p)) = c.transpose();
    input_pixels_.push_back(c);
  }
  std::vector<RenderOperator> all = ops_;
  all.push_back(front_);
  const auto cov = view_coverage(all, layout.texel_count());
  covered_.resize(cov.size());
  for (std::size_t i = 0; i < cov.size(); ++i) covered_[i] = cov[i] > 0.0;
}

void TextureObjective::set_targets(std::vector<ViewImage> targets) {
  if (targets.size() != ops_.size()) throw ContractViolation("refine: one target per sweep view required");
  target_mats_.clear();
  for (std::size_t v = 0; v < targets.size(); ++v) {
    if (targets[v].rgb.height != ops_[v].resolution() || targets[v].rgb.width != ops_[v].resolution())
      throw ContractViolation("refine: target resolution differs from the sweep");
    target_mats_.push_back(image_to_matrix(targets[v].rgb));
  }
  targets_ = std::move(targets);
}

std::vector<ViewImage> TextureObjective::render(const Matrix& texels) const {
  std::vector<ViewImage> out(ops_.size());
  parallel::for_each_index(static_cast<std::int64_t>(ops_.size()), [&](std::int64_t v) { out[v] = ops_[v].apply(texels); });
  return out;
}

namespace {

// Masked mean squared error over foreground pixels and channels, with its
// gradient in a.
double masked_mse(const Matrix& a, const Matrix& b, const std::vector<char>& mask, Matrix* grad) {
  double count = 0.0;
  for (char m : mask) count += m != 0;
  if (grad) *grad = Matrix::Zero(a.rows(), a.cols());
  if (count == 0.0) return 0.0;
  const double inv = 1.0 / (3.0 * count);
  double sum = 0.0;
  for (Eigen::Index p = 0; p < a.rows(); ++p) {
    if (!mask[static_cast<std::size_t>(p)]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = a(p, c) - b(p, c);
      sum += d * d;
      if (grad) (*grad)(p, c) = 2.0 * inv * d;
    }
  }
  return sum * inv;
}

}  // namespace

ObjectiveTerms TextureObjective::evaluate(const Matrix& texels, Matrix* grad) const {
  if (target_mats_.size() != ops_.size()) throw ContractViolation("refine: targets not set");
  const LossWeights& w = config_.weights;
  const std::size_t nv = ops_.size();
  std::vector<Matrix> rendered(nv), pixel_grad(nv);
  std::vector<double> mse(nv, 0.0), perc(nv, 0.0);
  const double view_scale = 1.0 / static_cast<double>(nv);
  parallel::for_each_index(static_cast<std::int64_t>(nv), [&](std::int64_t v) {
    const RenderOperator& op = ops_[v];
    rendered[v] = op.weights * texels;
    Matrix g_mse, g_perc;
    mse[v] = masked_mse(rendered[v], target_mats_[v], op.mask, grad ? &g_mse : nullptr);
    if (w.perceptual > 0.0)
      perc[v] = perceptual_->evaluate(rendered[v], target_mats_[v], op.resolution(), op.resolution(),
                                      grad ? &g_perc : nullptr);
    if (grad) {
      pixel_grad[v] = (w.mse * view_scale) * g_mse;
      if (w.perceptual > 0.0) pixel_grad[v] += (w.perceptual * view_scale) * g_perc;
    }
  });
  ObjectiveTerms t;
  for (std::size_t v = 0; v < nv; ++v) {
    t.mse += mse[v] * view_scale;
    t.perceptual += perc[v] * view_scale;
  }

  if (w.chamfer > 0.0 && !input_pixels_.empty()) {
    std::vector<Vec3> pooled;
    std::vector<std::pair<int, Eigen::Index>> origin;
    for (std::size_t v = 0; v < nv; ++v)
      for (std::size_t p = 0; p < ops_[v].mask.size(); ++p)
        if (ops_[v].mask[p]) {
          pooled.push_back(rendered[v].row(static_cast<Eigen::Index>(p)).transpose());
          origin.emplace_back(static_cast<int>(v), static_cast<Eigen::Index>(p));
        }
    if (!pooled.empty()) {
      const ChamferGrad cd = color_chamfer_grad(pooled, input_pixels_, config_.chamfer_points, config_.seed);
      t.chamfer = cd.value;
      if (grad)
        for (std::size_t i = 0; i < pooled.size(); ++i)
          if (!cd.grad_a[i].isZero(0.0))
            pixel_grad[origin[i].first].row(origin[i].second) += w.chamfer * cd.grad_a[i].transpose();
    }
  }

  Matrix front_grad;
  const Matrix front_px = front_.weights * texels;
  t.front = masked_mse(front_px, input_, front_.mask, grad ? &front_grad : nullptr);
  t.total = w.mse * t.mse + w.perceptual * t.perceptual + w.chamfer * t.chamfer + w.front * t.front;
  if (grad) {
    *grad = front_.backward(w.front * front_grad);
    for (std::size_t v = 0; v < nv; ++v) *grad += ops_[v].backward(pixel_grad[v]);
  }
  return t;
}

std::vector<ViewImage> make_targets(Refiner& refiner, const RefineConfig& config, const std::vector<ViewImage>& views) {
  if (config.key_views.empty()) return refine_views(refiner, config.prompt, views);
  std::vector<ViewImage> keys;
  for (int k : config.key_views) keys.push_back(views.at(static_cast<std::size_t>(k)));
  const std::vector<ViewImage> refined_keys = refine_views(refiner, config.prompt, keys);

  FeatureStack stack;
  for (const auto& v : views) {
    stack.views.push_back(patch_descriptors(v));
    stack.yaws.push_back(v.camera.yaw_deg);
  }
  const NNField field = nn_field(stack, config.key_views);
  std::vector<Matrix> edited(views.size());
  for (std::size_t k = 0; k < config.key_views.size(); ++k)
    edited[static_cast<std::size_t>(config.key_views[k])] = image_to_matrix(refined_keys[k].rgb);
  std::vector<ViewImage> out(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    out[v] = views[v];
    out[v].rgb = matrix_to_image(propagate(edited, static_cast<int>(v), field), views[v].rgb.height, views[v].rgb.width);
    for (std::size_t p = 0; p < out[v].mask.size(); ++p)
      if (!out[v].mask[p])
        for (int c = 0; c < 3; ++c) out[v].rgb.data[3 * p + c] = 0.0;
  }
  return out;
}

RefineResult optimize_texture(const TextureMap& initial, const geom::TriMesh& mesh, const Image& input_rgb,
                              const RefineConfig& config, Refiner& refiner, const std::vector<ViewImage>* source_views,
                              const RefineLogger& log) {
  TextureObjective objective(mesh, initial, input_rgb, config);
  const Matrix start = initial.as_matrix();
  ad::ParameterStore store;
  ad::Parameter& texels = store.add("texels", static_cast<int>(start.rows()), 3);
  texels.value = start;
  ad::Adam adam(ad::AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});

  if (source_views && source_views->size() != objective.sweep_ops().size())
    throw ContractViolation("refine: source views do not match the sweep");
  objective.set_targets(make_targets(refiner, config, source_views ? *source_views : objective.render(start)));

  RefineResult result;
  const auto& covered = objective.covered();
  for (char c : covered) result.covered_texels += c != 0;
  Matrix best = start;
  double best_value = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= config.steps; ++step) {
    if (step > 0 && step < config.steps && config.refresh_interval > 0 && step % config.refresh_interval == 0)
      objective.set_targets(make_targets(refiner, config, objective.render(texels.value)));
    Matrix grad;
    const ObjectiveTerms terms = objective.evaluate(texels.value, step < config.steps ? &grad : nullptr);
    if (!std::isfinite(terms.total))
      throw DivergenceError("texture objective became non-finite at step " + std::to_string(step), step);
    result.history.push_back(terms);
    if (log) log(step, terms);
    if (terms.total < best_value) {
      best_value = terms.total;
      best = texels.value;
      result.best_step = step;
    }
    if (step == config.steps) break;
    for (Eigen::Index i = 0; i < grad.rows(); ++i)
      if (!covered[static_cast<std::size_t>(i)]) grad.row(i).setZero();
    texels.grad = std::move(grad);
    try {
      adam.step(store);
    } catch (const NumericalError& e) {
      throw DivergenceError(std::string("texture optimization diverged: ") + e.what(), step);
    }
    for (Eigen::Index i = 0; i < texels.value.rows(); ++i) {
      if (!covered[static_cast<std::size_t>(i)]) texels.value.row(i) = start.row(i);
      else texels.value.row(i) = texels.value.row(i).cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  result.texture = initial;
  result.texture.set_from_matrix(best);
  result.targets = objective.targets();
  return result;
}

double texture_psnr(const TextureMap& a, const TextureMap& b, const std::vector<char>& mask) {
  if (!a.texels.same_shape(b.texels) || mask.size() != a.texel_count())
    throw ContractViolation("texture_psnr: shape mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = a.texels.data[3 * i + c] - b.texels.data[3 * i + c];
      sum += d * d;
    }
    count += 3;
  }
  if (count == 0) throw ContractViolation("texture_psnr: empty mask");
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(count) / sum);
}

}  // namespace sidefield::texture
