#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "sidefield/core/image.hpp"
#include "sidefield/core/types.hpp"

namespace sidefield::texture {

/// Image-pair loss on (h*w) x 3 pixel matrices, differentiable in the first
/// argument.
class PerceptualLoss {
 public:
  virtual ~PerceptualLoss() = default;
  /// Returns the loss; fills grad_a (same shape as a) when non-null.
  virtual double evaluate(const Matrix& a, const Matrix& b, int height, int width, Matrix* grad_a) const = 0;
};

/// Sum over dyadic levels (full, 1/2, 1/4; 2x2 box downsampling, odd edges
/// dropped) of the mean squared difference of local 3x3 mean maps plus that
/// of local 3x3 standard-deviation maps. Windows are clipped at the border.
class PatchStatsLoss final : public PerceptualLoss {
 public:
  explicit PatchStatsLoss(int levels = 3, double eps = 1e-8) : levels_(levels), eps_(eps) {}
  double evaluate(const Matrix& a, const Matrix& b, int height, int width, Matrix* grad_a) const override;

 private:
  struct Level {
    int height = 0, width = 0;
    SparseMatrix mean, mean_t;  // 3x3 window average
    SparseMatrix down, down_t;  // from the previous level; empty at level 0
  };
  const std::vector<Level>& levels_for(int height, int width) const;

  int levels_;
  double eps_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, int>, std::vector<Level>> cache_;
};

double perceptual_loss(const Image& a, const Image& b);

/// Up to max_points distinct indices of [0, n), drawn without replacement;
/// all of them (in order) when n <= max_points.
std::vector<int> subsample_indices(int n, int max_points, std::uint64_t seed);

struct ChamferGrad {
  double value = 0.0;
  std::vector<Vec3> grad_a;  // d value / d a, zero for points left out of the subsample
};

/// Symmetric color Chamfer: the average of the two directed mean squared
/// nearest-neighbour distances between RGB point sets. Each side is
/// subsampled to max_points with seeds derive(seed, 0) and derive(seed, 1).
/// Nearest-neighbour ties go to the lowest index.
double color_chamfer(std::span<const Vec3> a, std::span<const Vec3> b, int max_points = 4096,
                     std::uint64_t seed = 0);

/// Same value plus its gradient in a for the current nearest-neighbour assignment.
ChamferGrad color_chamfer_grad(std::span<const Vec3> a, std::span<const Vec3> b, int max_points = 4096,
                               std::uint64_t seed = 0);

}  // namespace sidefield::texture
