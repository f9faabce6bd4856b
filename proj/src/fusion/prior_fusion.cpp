#include "sidefield/fusion/prior_fusion.hpp"

#include <algorithm>
#include <cmath>

#include "sidefield/core/error.hpp"

namespace sidefield::fusion {

QueryMode parse_query_mode(const std::string& s) {
  if (s == "hybrid") return QueryMode::kHybrid;
  if (s == "pixel_aligned") return QueryMode::kPixelAligned;
  throw ConfigError("unknown query mode '" + s + "' (expected hybrid or pixel_aligned)");
}

std::string to_string(QueryMode mode) { return mode == QueryMode::kHybrid ? "hybrid" : "pixel_aligned"; }

int fused_width(int plane_channels, QueryMode mode) {
  return (mode == QueryMode::kHybrid ? 4 : 2) * plane_channels + 1 + 6;
}

BilinearTaps bilinear_taps(double u, double v, int width, int height) {
  const double fx = std::clamp(u * width - 0.5, 0.0, static_cast<double>(width - 1));
  const double fy = std::clamp(v * height - 0.5, 0.0, static_cast<double>(height - 1));
  const int x0 = std::min(static_cast<int>(fx), width - 1);
  const int y0 = std::min(static_cast<int>(fy), height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double ax = fx - x0, ay = fy - y0;
  BilinearTaps t;
  t.index = {y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1};
  t.weight = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  return t;
}

Eigen::VectorXd sample_image(const Image& image, double u, double v) {
  const BilinearTaps t = bilinear_taps(u, v, image.width, image.height);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(image.channels);
  for (int k = 0; k < 4; ++k)
    for (int c = 0; c < image.channels; ++c)
      out[c] += t.weight[k] * image.data[static_cast<std::size_t>(t.index[k]) * image.channels + c];
  return out;
}

Eigen::RowVectorXd sample_plane(const Matrix& plane, int size, double u, double v) {
  if (plane.rows() != static_cast<Eigen::Index>(size) * size) throw ContractViolation("sample_plane: size mismatch");
  const BilinearTaps t = bilinear_taps(u, v, size, size);
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(plane.cols());
  for (int k = 0; k < 4; ++k) out += t.weight[k] * plane.row(t.index[k]);
  return out;
}

SparseMatrix plane_sampling_matrix(std::span<const Vec3> points, const geom::Camera& camera, int plane_size) {
  std::vector<Triplet> trip;
  trip.reserve(points.size() * 4);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const geom::Projection p = geom::project(points[i], camera);
    const BilinearTaps t = bilinear_taps(p.u, p.v, plane_size, plane_size);
    for (int k = 0; k < 4; ++k)
      if (t.weight[k] != 0.0) trip.emplace_back(static_cast<int>(i), t.index[k], t.weight[k]);
  }
  SparseMatrix m(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(plane_size) * plane_size);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Image mirror_horizontal(const Image& image) {
  Image out(image.height, image.width, image.channels);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

PriorContext make_prior_context(const geom::TriMesh& body, int plane_size, int normal_resolution) {
  if (plane_size <= 0 || normal_resolution <= 0) throw ContractViolation("make_prior_context: sizes must be positive");
  geom::validate(body);
  PriorContext ctx;
  ctx.body = body;
  ctx.index = std::make_shared<geom::SurfaceIndex>(body);
  ctx.cameras = geom::canonical_cameras(normal_resolution);
  ctx.plane_size = plane_size;
  for (int k = 0; k < 4; ++k) ctx.vertex_sampling[k] = plane_sampling_matrix(body.vertices, ctx.cameras[k], plane_size);
  ctx.front_normals = body::render_normal_map(body, ctx.cameras[0]);
  ctx.back_normals_aligned = mirror_horizontal(body::render_normal_map(body, ctx.cameras[2]).pixels);
  return ctx;
}

QueryBatch prepare_queries(const PriorContext& prior, std::span<const Vec3> points, QueryMode mode) {
  for (const Vec3& p : points)
    if (!p.allFinite()) throw ContractViolation("prepare_queries: non-finite query point");
  QueryBatch b;
  b.count = points.size();
  for (int k = 0; k < 4; ++k) b.spatial[k] = plane_sampling_matrix(points, prior.cameras[k], prior.plane_size);

  const auto nearest = prior.index->nearest_batch(points);
  b.sdf.resize(static_cast<Eigen::Index>(points.size()), 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& r = nearest[i];
    b.sdf(i, 0) = r.distance <= geom::kSurfaceEpsilon ? 0.0 : (r.inside ? -r.distance : r.distance);
  }
  if (mode == QueryMode::kHybrid) {
    std::vector<Triplet> trip;
    trip.reserve(points.size() * 3);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Face& f = prior.body.faces[nearest[i].face];
      for (int k = 0; k < 3; ++k)
        if (nearest[i].bary[k] != 0.0) trip.emplace_back(static_cast<int>(i), f[k], nearest[i].bary[k]);
    }
    SparseMatrix bary(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(prior.body.vertices.size()));
    bary.setFromTriplets(trip.begin(), trip.end());
    for (int k = 0; k < 4; ++k) b.prior[k] = (bary * prior.vertex_sampling[k]).pruned();
  }

  b.normal_feature.resize(static_cast<Eigen::Index>(points.size()), 6);
  b.out_of_frame.assign(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const geom::Projection p = geom::project(points[i], prior.cameras[0]);
    b.out_of_frame[i] = p.out_of_frame;
    const Eigen::VectorXd f = sample_image(prior.front_normals.pixels, p.u, p.v);
    const Eigen::VectorXd k = sample_image(prior.back_normals_aligned, p.u, p.v);
    for (int c = 0; c < 3; ++c) {
      b.normal_feature(i, c) = f[c];
      b.normal_feature(i, 3 + c) = k[c];
    }
  }
  return b;
}

ad::Var spatial_query(ad::Tape& tape, const encoder::PlaneVars& planes, const std::array<SparseMatrix, 4>& sampling) {
  const ad::Var front = tape.sparse_left(sampling[0], planes.planes[0]);
  ad::Var sides = tape.sparse_left(sampling[1], planes.planes[1]);
  sides = tape.add(sides, tape.sparse_left(sampling[2], planes.planes[2]));
  sides = tape.add(sides, tape.sparse_left(sampling[3], planes.planes[3]));
  const ad::Var parts[] = {front, tape.scale(sides, 1.0 / 3.0)};
  return tape.concat_cols(parts);
}

ad::Var fused_features(ad::Tape& tape, const encoder::PlaneVars& planes, const QueryBatch& batch, QueryMode mode) {
  std::vector<ad::Var> parts;
  parts.push_back(spatial_query(tape, planes, batch.spatial));
  if (mode == QueryMode::kHybrid) {
    if (batch.prior[0].rows() != static_cast<Eigen::Index>(batch.count))
      throw ContractViolation("fused_features: batch was prepared without prior queries");
    parts.push_back(spatial_query(tape, planes, batch.prior));
  }
  parts.push_back(tape.constant(batch.sdf));
  parts.push_back(tape.constant(batch.normal_feature));
  return tape.concat_cols(parts);
}

HeadConfig HeadConfig::desk() { return HeadConfig{}; }

HeadConfig HeadConfig::paper() {
  HeadConfig c;
  c.hidden = {512, 1024, 512, 256, 128};
  return c;
}

nlohmann::json HeadConfig::to_json() const { return {{"hidden", hidden}, {"init_std", init_std}}; }

HeadConfig HeadConfig::from_json(const nlohmann::json& j, const HeadConfig& base) {
  HeadConfig c = base;
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "hidden") c.hidden = val.get<std::vector<int>>();
      else if (key == "init_std") c.init_std = val.get<double>();
      else throw ConfigError("head config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("head config: ") + e.what());
  }
  for (int h : c.hidden)
    if (h <= 0) throw ConfigError("head config: hidden sizes must be positive");
  if (!(c.init_std > 0)) throw ConfigError("head config: init_std must be positive");
  return c;
}

FieldHeads::FieldHeads(const HeadConfig& config, int input_width, ad::ParameterStore& store, Rng& rng)
    : input_width_(input_width) {
  if (input_width <= 0) throw ContractViolation("FieldHeads: input width must be positive");
  auto build = [&](const std::string& prefix, int out_width, std::vector<Layer>& layers) {
    int in = input_width;
    std::vector<int> sizes = config.hidden;
    sizes.push_back(out_width);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const std::string name = prefix + ".layer" + std::to_string(i);
      // Scaled so activations keep unit variance through the stack.
      const double std_dev = i + 1 == sizes.size() ? config.init_std : std::sqrt(2.0 / in);
      Layer l{&store.add_normal(name + ".weight", in, sizes[i], std_dev, rng), &store.add(name + ".bias", 1, sizes[i])};
      layers.push_back(l);
      in = sizes[i];
    }
  };
  build("head.occupancy", 1, occupancy_);
  build("head.color", 3, color_);
}

ad::Var FieldHeads::run(ad::Tape& tape, ad::Var x, const std::vector<Layer>& layers) const {
  if (tape.value(x).cols() != input_width_)
    throw ContractViolation("FieldHeads: fused width " + std::to_string(tape.value(x).cols()) + " does not match " +
                            std::to_string(input_width_));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = tape.add_row(tape.matmul(x, tape.parameter(*layers[i].weight)), tape.parameter(*layers[i].bias));
    x = i + 1 == layers.size() ? tape.sigmoid(x) : tape.gelu(x);
  }
  return x;
}

ad::Var FieldHeads::occupancy(ad::Tape& tape, ad::Var fused) const { return run(tape, fused, occupancy_); }
ad::Var FieldHeads::color(ad::Tape& tape, ad::Var fused) const { return run(tape, fused, color_); }

}  // namespace sidefield::fusion
