#include "sidefield/texture/render.hpp"

#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"
#include "sidefield/geom/raster.hpp"

namespace sidefield::texture {

bool ViewImage::empty() const { return foreground() == 0; }

int ViewImage::foreground() const {
  int n = 0;
  for (char m : mask) n += m != 0;
  return n;
}

ViewImage RenderOperator::apply(const Matrix& texels) const {
  const int res = resolution();
  ViewImage v;
  v.camera = camera;
  v.mask = mask;
  v.rgb = matrix_to_image(weights * texels, res, res);
  return v;
}

Matrix RenderOperator::backward(const Matrix& pixel_grad) const { return weights_t * pixel_grad; }

RenderOperator make_render_operator(const geom::TriMesh& mesh, const TextureMap& tex, const geom::Camera& camera) {
  if (tex.uvs.size() != 3 * mesh.faces.size())
    throw ContractViolation("render: texture charts do not match the mesh face count");
  camera.validate();
  const geom::RasterBuffer buf = geom::rasterize(mesh.vertices, mesh.faces, camera);
  const int res = tex.resolution();
  RenderOperator op;
  op.camera = camera;
  op.mask.assign(buf.face.size(), 0);
  std::vector<Triplet> trip;
  trip.reserve(4 * static_cast<std::size_t>(buf.covered_pixels()));
  for (std::size_t p = 0; p < buf.face.size(); ++p) {
    const int f = buf.face[p];
    if (f < 0) continue;
    op.mask[p] = 1;
    const Vec3& b = buf.bary[p];
    const Vec2 uv = b[0] * tex.uv(f, 0) + b[1] * tex.uv(f, 1) + b[2] * tex.uv(f, 2);
    const BilinearTap tap = bilinear_tap(uv, res);
    for (int k = 0; k < 4; ++k)
      if (tap.weight[k] != 0.0) trip.emplace_back(static_cast<int>(p), tap.texel[k], tap.weight[k]);
  }
  op.weights.resize(static_cast<Eigen::Index>(buf.face.size()), static_cast<Eigen::Index>(tex.texel_count()));
  op.weights.setFromTriplets(trip.begin(), trip.end());
  op.weights_t = op.weights.transpose();
  return op;
}

std::vector<RenderOperator> make_render_operators(const geom::TriMesh& mesh, const TextureMap& tex,
                                                  const std::vector<geom::Camera>& cameras) {
  std::vector<RenderOperator> ops(cameras.size());
  parallel::for_each_index(static_cast<std::int64_t>(cameras.size()),
                           [&](std::int64_t i) { ops[i] = make_render_operator(mesh, tex, cameras[i]); });
  return ops;
}

std::vector<ViewImage> render_views(const TextureMap& tex, const geom::TriMesh& mesh,
                                    const std::vector<geom::Camera>& cameras) {
  const Matrix texels = tex.as_matrix();
  std::vector<ViewImage> out(cameras.size());
  parallel::for_each_index(static_cast<std::int64_t>(cameras.size()),
                           [&](std::int64_t i) { out[i] = make_render_operator(mesh, tex, cameras[i]).apply(texels); });
  return out;
}

std::vector<double> view_coverage(const std::vector<RenderOperator>& ops, std::size_t texels) {
  std::vector<double> cov(texels, 0.0);
  for (const auto& op : ops)
    for (Eigen::Index k = 0; k < op.weights_t.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(op.weights_t, k); it; ++it) cov[static_cast<std::size_t>(k)] += it.value();
  return cov;
}

Matrix image_to_matrix(const Image& img) {
  Matrix m(static_cast<Eigen::Index>(img.pixel_count()), img.channels);
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < img.channels; ++c) m(static_cast<Eigen::Index>(p), c) = img.data[p * img.channels + c];
  return m;
}

Image matrix_to_image(const Matrix& m, int height, int width) {
  if (m.rows() != static_cast<Eigen::Index>(height) * width) throw ContractViolation("matrix_to_image: size mismatch");
  Image img(height, width, static_cast<int>(m.cols()));
  for (Eigen::Index p = 0; p < m.rows(); ++p)
    for (Eigen::Index c = 0; c < m.cols(); ++c) img.data[static_cast<std::size_t>(p * m.cols() + c)] = m(p, c);
  return img;
}

}  // namespace sidefield::texture
