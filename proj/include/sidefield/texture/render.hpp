#pragma once

#include <vector>

#include "sidefield/core/image.hpp"
#include "sidefield/geom/camera.hpp"
#include "sidefield/geom/mesh.hpp"
#include "sidefield/texture/texture_map.hpp"

namespace sidefield::texture {

/// Rendered or refined RGB view. Background pixels are exactly zero.
struct ViewImage {
  Image rgb;
  std::vector<char> mask;
  geom::Camera camera;

  bool empty() const;
  int foreground() const;
};

/// Texture-to-view map for fixed geometry: the view's pixels (row-major,
/// resolution^2 rows) equal weights * texels, where texels is the
/// (R*R) x 3 texel matrix. Each covered pixel carries the four bilinear taps
/// at its interpolated UV.
struct RenderOperator {
  geom::Camera camera;
  SparseMatrix weights;
  SparseMatrix weights_t;
  std::vector<char> mask;

  int resolution() const { return camera.resolution; }
  ViewImage apply(const Matrix& texels) const;
  /// Pixel gradient (resolution^2 x 3) to texel gradient.
  Matrix backward(const Matrix& pixel_grad) const;
};

RenderOperator make_render_operator(const geom::TriMesh& mesh, const TextureMap& tex, const geom::Camera& camera);
std::vector<RenderOperator> make_render_operators(const geom::TriMesh& mesh, const TextureMap& tex,
                                                  const std::vector<geom::Camera>& cameras);

std::vector<ViewImage> render_views(const TextureMap& tex, const geom::TriMesh& mesh,
                                    const std::vector<geom::Camera>& cameras);

/// Per-texel sum of bilinear weights over every operator's pixels.
std::vector<double> view_coverage(const std::vector<RenderOperator>& ops, std::size_t texels);

Matrix image_to_matrix(const Image& img);
Image matrix_to_image(const Matrix& m, int height, int width);

}  // namespace sidefield::texture
