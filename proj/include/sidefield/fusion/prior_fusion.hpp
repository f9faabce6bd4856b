#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidefield/ad/parameters.hpp"
#include "sidefield/ad/tape.hpp"
#include "sidefield/body/normal_render.hpp"
#include "sidefield/core/image.hpp"
#include "sidefield/encoder/sideview_encoder.hpp"
#include "sidefield/geom/camera.hpp"
#include "sidefield/geom/mesh.hpp"
#include "sidefield/geom/surface_index.hpp"

namespace sidefield::fusion {

enum class QueryMode { kHybrid, kPixelAligned };

QueryMode parse_query_mode(const std::string& s);
std::string to_string(QueryMode mode);

/// Width of the head input: spatial 2C, prior 2C (hybrid only), sdf 1, normal 6.
int fused_width(int plane_channels, QueryMode mode);

/// Four bilinear taps on a size x size grid with texel centres at
/// ((i + 0.5) / size); coordinates outside the centre lattice clamp to the
/// edge texels.
struct BilinearTaps {
  std::array<int, 4> index{};  // y * size + x
  std::array<double, 4> weight{};
};
BilinearTaps bilinear_taps(double u, double v, int width, int height);

/// Bilinear read of an image (H x W x C) at unit-square coordinates.
Eigen::VectorXd sample_image(const Image& image, double u, double v);

/// Bilinear read of a plane stored as (size^2) x C rows.
Eigen::RowVectorXd sample_plane(const Matrix& plane, int size, double u, double v);

/// Row i samples the plane at the projection of points[i] through camera.
SparseMatrix plane_sampling_matrix(std::span<const Vec3> points, const geom::Camera& camera, int plane_size);

/// Mirrors an image left to right. Back-view renders are stored mirrored so
/// that they align with the front view.
Image mirror_horizontal(const Image& image);

/// Body-prior data shared by every query batch of one subject/view: the body
/// surface, the canonical cameras, per-vertex plane sampling and the front
/// and (front-aligned) back body normal renders.
struct PriorContext {
  geom::TriMesh body;
  std::shared_ptr<const geom::SurfaceIndex> index;
  std::array<geom::Camera, 4> cameras;
  int plane_size = 0;
  std::array<SparseMatrix, 4> vertex_sampling;  // V x plane_size^2
  body::NormalImage front_normals;
  Image back_normals_aligned;                   // back render, mirrored
};

/// Canonical cameras are yaw 0/90/180/270 at unit scale; normal renders use
/// normal_resolution pixels.
PriorContext make_prior_context(const geom::TriMesh& body, int plane_size, int normal_resolution);

/// Per-batch constants: sampling matrices for the spatial and prior parts,
/// signed distances, normal features. Nearest faces are resolved here once.
struct QueryBatch {
  std::size_t count = 0;
  std::array<SparseMatrix, 4> spatial;  // n x plane_size^2
  std::array<SparseMatrix, 4> prior;    // n x plane_size^2 (hybrid only)
  Matrix sdf;                           // n x 1
  Matrix normal_feature;                // n x 6
  std::vector<char> out_of_frame;       // front projection was clamped
};

QueryBatch prepare_queries(const PriorContext& prior, std::span<const Vec3> points, QueryMode mode);

/// F^S = front (+) mean(left, back, right), n x 2C.
ad::Var spatial_query(ad::Tape& tape, const encoder::PlaneVars& planes, const std::array<SparseMatrix, 4>& sampling);

/// Head input [F^S, F^P, sdf, F^N] (F^P omitted in pixel-aligned mode).
ad::Var fused_features(ad::Tape& tape, const encoder::PlaneVars& planes, const QueryBatch& batch, QueryMode mode);

struct HeadConfig {
  std::vector<int> hidden = {128, 256, 128, 64};
  double init_std = 0.02;

  static HeadConfig desk();
  static HeadConfig paper();  // [512, 1024, 512, 256, 128]
  nlohmann::json to_json() const;
  static HeadConfig from_json(const nlohmann::json& j, const HeadConfig& base);
};

/// Occupancy and color MLPs with GELU hidden layers and logistic outputs.
class FieldHeads {
 public:
  FieldHeads(const HeadConfig& config, int input_width, ad::ParameterStore& store, Rng& rng);

  int input_width() const { return input_width_; }
  ad::Var occupancy(ad::Tape& tape, ad::Var fused) const;  // n x 1 in (0, 1)
  ad::Var color(ad::Tape& tape, ad::Var fused) const;      // n x 3 in (0, 1)

 private:
  struct Layer {
    ad::Parameter* weight;
    ad::Parameter* bias;
  };
  ad::Var run(ad::Tape& tape, ad::Var x, const std::vector<Layer>& layers) const;

  int input_width_;
  std::vector<Layer> occupancy_;
  std::vector<Layer> color_;
};

}  // namespace sidefield::fusion
