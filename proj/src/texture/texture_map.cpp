#include "sidefield/texture/texture_map.hpp"

#include <algorithm>
#include <cmath>

#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"
#include "sidefield/geom/triangle.hpp"

namespace sidefield::texture {

nlohmann::json UvConfig::to_json() const {
  return {{"resolution", resolution}, {"margin", margin}, {"gap", gap}};
}

UvConfig UvConfig::from_json(const nlohmann::json& j, UvConfig base) {
  if (!j.is_object()) throw ConfigError("uv config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "resolution") base.resolution = value.get<int>();
      else if (key == "margin") base.margin = value.get<double>();
      else if (key == "gap") base.gap = value.get<double>();
      else throw ConfigError("unknown uv config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("uv config: ") + e.what());
  }
  if (base.resolution < 8) throw ConfigError("texture resolution must be >= 8");
  if (base.margin < 0.0 || base.gap < 0.0) throw ConfigError("uv margin and gap must be >= 0");
  return base;
}

Matrix TextureMap::as_matrix() const {
  Matrix m(static_cast<Eigen::Index>(texel_count()), 3);
  for (std::size_t i = 0; i < texel_count(); ++i)
    for (int c = 0; c < 3; ++c) m(static_cast<Eigen::Index>(i), c) = texels.data[3 * i + c];
  return m;
}

void TextureMap::set_from_matrix(const Matrix& m) {
  if (m.rows() != static_cast<Eigen::Index>(texel_count()) || m.cols() != 3)
    throw ContractViolation("TextureMap::set_from_matrix: shape mismatch");
  for (std::size_t i = 0; i < texel_count(); ++i)
    for (int c = 0; c < 3; ++c) texels.data[3 * i + c] = m(static_cast<Eigen::Index>(i), c);
}

nlohmann::json TextureMap::manifest() const {
  nlohmann::json charts = nlohmann::json::array();
  for (std::size_t f = 0; f < uvs.size() / 3; ++f) {
    nlohmann::json corners = nlohmann::json::array();
    for (int k = 0; k < 3; ++k) corners.push_back({uvs[3 * f + k].x(), uvs[3 * f + k].y()});
    charts.push_back(std::move(corners));
  }
  return {{"resolution", resolution()}, {"grid", grid}, {"layout", "two-charts-per-cell"}, {"face_uvs", charts}};
}

namespace {

struct Layout {
  int grid = 0;
  double cell = 0.0;
};

Layout layout_for(int face_count, const UvConfig& cfg) {
  const int cells = (face_count + 1) / 2;
  Layout l;
  l.grid = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cells)))));
  l.cell = static_cast<double>(cfg.resolution) / l.grid;
  return l;
}

// Corner positions in texel units.
std::array<Vec2, 3> chart_corners(int face, const Layout& l, const UvConfig& cfg) {
  const int k = face / 2;
  const double cx = (k % l.grid) * l.cell, cy = (k / l.grid) * l.cell;
  const double s = l.cell, m = cfg.margin, d = cfg.gap;
  if (face % 2 == 0) return {Vec2(cx + m, cy + m), Vec2(cx + s - m - d, cy + m), Vec2(cx + m, cy + s - m - d)};
  return {Vec2(cx + s - m, cy + s - m), Vec2(cx + m + d, cy + s - m), Vec2(cx + s - m, cy + m + d)};
}

geom::ClosestPoint closest_2d(const Vec2& p, const std::array<Vec2, 3>& t) {
  auto lift = [](const Vec2& q) { return Vec3(q.x(), q.y(), 0.0); };
  return geom::closest_point_on_triangle(lift(p), lift(t[0]), lift(t[1]), lift(t[2]));
}

}  // namespace

TextureMap make_atlas(int face_count, const UvConfig& cfg) {
  if (face_count < 1) throw ContractViolation("make_atlas: mesh has no faces");
  const Layout l = layout_for(face_count, cfg);
  const double min_cell = 2.0 * cfg.margin + cfg.gap + 1.0;
  if (l.cell < min_cell)
    throw ConfigError("texture resolution " + std::to_string(cfg.resolution) + " too small for " +
                      std::to_string(face_count) + " faces");
  TextureMap tex;
  tex.texels = Image(cfg.resolution, cfg.resolution, 3);
  tex.coverage.assign(tex.texel_count(), 0.0);
  tex.grid = l.grid;
  tex.uvs.resize(3 * static_cast<std::size_t>(face_count));
  const double r = cfg.resolution;
  for (int f = 0; f < face_count; ++f) {
    const auto c = chart_corners(f, l, cfg);
    for (int k = 0; k < 3; ++k) tex.uvs[3 * static_cast<std::size_t>(f) + k] = c[k] / r;
  }
  return tex;
}

TextureMap unwrap_and_backproject(const geom::TriMesh& mesh, const UvConfig& cfg) {
  geom::validate(mesh);
  if (!mesh.has_colors()) throw ContractViolation("unwrap_and_backproject: mesh has no vertex colors");
  const int nf = static_cast<int>(mesh.faces.size());
  TextureMap tex = make_atlas(nf, cfg);
  const Layout l = layout_for(nf, cfg);
  const int res = cfg.resolution;
  parallel::for_each_index(res, [&](std::int64_t y) {
    for (int x = 0; x < res; ++x) {
      const Vec2 p(x + 0.5, static_cast<double>(y) + 0.5);
      const int gx = static_cast<int>(p.x() / l.cell), gy = static_cast<int>(p.y() / l.cell);
      if (gx >= l.grid || gy >= l.grid) continue;
      const int first = 2 * (gy * l.grid + gx);
      if (first >= nf) continue;
      int best = first;
      geom::ClosestPoint cp = closest_2d(p, chart_corners(first, l, cfg));
      if (first + 1 < nf) {
        const auto other = closest_2d(p, chart_corners(first + 1, l, cfg));
        if (other.distance_sq < cp.distance_sq) {
          cp = other;
          best = first + 1;
        }
      }
      const auto& t = mesh.faces[best];
      const Vec3 col = cp.bary[0] * mesh.colors[t[0]] + cp.bary[1] * mesh.colors[t[1]] + cp.bary[2] * mesh.colors[t[2]];
      const std::size_t i = static_cast<std::size_t>(y) * res + x;
      for (int c = 0; c < 3; ++c) tex.texels.data[3 * i + c] = col[c];
      tex.coverage[i] = 1.0;
    }
  });
  Vec3 mean = Vec3::Zero();
  double owned = 0.0;
  for (std::size_t i = 0; i < tex.texel_count(); ++i) {
    if (tex.coverage[i] == 0.0) continue;
    mean += Vec3(tex.texels.data[3 * i], tex.texels.data[3 * i + 1], tex.texels.data[3 * i + 2]);
    owned += 1.0;
  }
  mean /= owned;
  for (std::size_t i = 0; i < tex.texel_count(); ++i)
    if (tex.coverage[i] == 0.0)
      for (int c = 0; c < 3; ++c) tex.texels.data[3 * i + c] = mean[c];
  return tex;
}

BilinearTap bilinear_tap(const Vec2& uv, int res) {
  const double fx = uv.x() * res - 0.5, fy = uv.y() * res - 0.5;
  const double x0f = std::floor(fx), y0f = std::floor(fy);
  const double ax = fx - x0f, ay = fy - y0f;
  auto clampi = [res](double v) { return std::clamp(static_cast<int>(v), 0, res - 1); };
  const int x0 = clampi(x0f), x1 = clampi(x0f + 1), y0 = clampi(y0f), y1 = clampi(y0f + 1);
  BilinearTap t;
  t.texel = {y0 * res + x0, y0 * res + x1, y1 * res + x0, y1 * res + x1};
  t.weight = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  return t;
}

Vec3 sample(const TextureMap& tex, const Vec2& uv) {
  const BilinearTap t = bilinear_tap(uv, tex.resolution());
  Vec3 out = Vec3::Zero();
  for (int k = 0; k < 4; ++k) {
    const std::size_t i = static_cast<std::size_t>(t.texel[k]);
    out += t.weight[k] * Vec3(tex.texels.data[3 * i], tex.texels.data[3 * i + 1], tex.texels.data[3 * i + 2]);
  }
  return out;
}

}  // namespace sidefield::texture
