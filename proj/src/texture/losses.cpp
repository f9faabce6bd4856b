#include "sidefield/texture/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"
#include "sidefield/core/rng.hpp"
#include "sidefield/texture/render.hpp"

namespace sidefield::texture {

namespace {

SparseMatrix window_mean(int h, int w) {
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(h) * w * 9);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
      const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
      const double inv = 1.0 / ((y1 - y0 + 1) * (x1 - x0 + 1));
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx) trip.emplace_back(y * w + x, yy * w + xx, inv);
    }
  SparseMatrix m(h * w, h * w);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMatrix downsample(int h, int w) {
  const int oh = h / 2, ow = w / 2;
  std::vector<Triplet> trip;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) trip.emplace_back(y * ow + x, (2 * y + dy) * w + 2 * x + dx, 0.25);
  SparseMatrix m(oh * ow, h * w);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

}  // namespace

const std::vector<PatchStatsLoss::Level>& PatchStatsLoss::levels_for(int height, int width) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = cache_.find({height, width});
  if (it != cache_.end()) return it->second;
  std::vector<Level> levels;
  int h = height, w = width;
  for (int l = 0; l < levels_; ++l) {
    Level lv;
    if (l > 0) {
      if (h < 2 || w < 2) break;
      lv.down = downsample(h, w);
      lv.down_t = lv.down.transpose();
      h /= 2;
      w /= 2;
    }
    lv.height = h;
    lv.width = w;
    lv.mean = window_mean(h, w);
    lv.mean_t = lv.mean.transpose();
    levels.push_back(std::move(lv));
  }
  return cache_.emplace(std::make_pair(height, width), std::move(levels)).first->second;
}

double PatchStatsLoss::evaluate(const Matrix& a, const Matrix& b, int height, int width, Matrix* grad_a) const {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != static_cast<Eigen::Index>(height) * width)
    throw ContractViolation("perceptual loss: images must have equal resolution");
  const auto& levels = levels_for(height, width);
  const int n_levels = static_cast<int>(levels.size());
  std::vector<Matrix> xa(n_levels), xb(n_levels), dx(n_levels);
  double total = 0.0;
  for (int l = 0; l < n_levels; ++l) {
    const Level& lv = levels[l];
    xa[l] = l == 0 ? a : Matrix(lv.down * xa[l - 1]);
    xb[l] = l == 0 ? b : Matrix(lv.down * xb[l - 1]);
    const Matrix mu_a = lv.mean * xa[l], mu_b = lv.mean * xb[l];
    const Matrix var_a = lv.mean * xa[l].cwiseAbs2() - mu_a.cwiseAbs2();
    const Matrix var_b = lv.mean * xb[l].cwiseAbs2() - mu_b.cwiseAbs2();
    const Matrix sd_a = (var_a.array() + eps_).sqrt().matrix();
    const Matrix sd_b = (var_b.array() + eps_).sqrt().matrix();
    const double count = static_cast<double>(mu_a.size());
    total += ((mu_a - mu_b).squaredNorm() + (sd_a - sd_b).squaredNorm()) / count;
    if (grad_a) {
      const Matrix d_mu = (2.0 / count) * (mu_a - mu_b);
      const Matrix d_var = ((1.0 / count) * (sd_a - sd_b).array() / sd_a.array()).matrix();
      dx[l] = lv.mean_t * (d_mu - 2.0 * mu_a.cwiseProduct(d_var)) +
              2.0 * xa[l].cwiseProduct(lv.mean_t * d_var);
    }
  }
  if (grad_a) {
    for (int l = n_levels - 1; l > 0; --l) dx[l - 1] += levels[l].down_t * dx[l];
    *grad_a = std::move(dx[0]);
  }
  return total;
}

double perceptual_loss(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ContractViolation("perceptual loss: images must have equal resolution");
  static const PatchStatsLoss loss;
  return loss.evaluate(image_to_matrix(a), image_to_matrix(b), a.height, a.width, nullptr);
}

std::vector<int> subsample_indices(int n, int max_points, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= max_points) return idx;
  Rng rng(seed);
  for (int i = 0; i < max_points; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(max_points));
  return idx;
}

namespace {

// For each query, the index into targets of its nearest neighbour.
std::vector<int> nearest(std::span<const Vec3> queries, std::span<const Vec3> targets) {
  std::vector<int> out(queries.size());
  parallel::for_each_index(static_cast<std::int64_t>(queries.size()), [&](std::int64_t i) {
    const Vec3& q = queries[i];
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t j = 0; j < targets.size(); ++j) {
      const double d = (q - targets[j]).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    out[i] = arg;
  });
  return out;
}

}  // namespace

ChamferGrad color_chamfer_grad(std::span<const Vec3> a, std::span<const Vec3> b, int max_points, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw ContractViolation("color_chamfer: both pixel sets must be non-empty");
  if (max_points < 1) throw ContractViolation("color_chamfer: max_points must be >= 1");
  const auto ia = subsample_indices(static_cast<int>(a.size()), max_points, Rng::derive(seed, 0));
  const auto ib = subsample_indices(static_cast<int>(b.size()), max_points, Rng::derive(seed, 1));
  std::vector<Vec3> pa(ia.size()), pb(ib.size());
  for (std::size_t i = 0; i < ia.size(); ++i) pa[i] = a[ia[i]];
  for (std::size_t i = 0; i < ib.size(); ++i) pb[i] = b[ib[i]];
  const auto nn_ab = nearest(pa, pb);
  const auto nn_ba = nearest(pb, pa);
  ChamferGrad r;
  r.grad_a.assign(a.size(), Vec3::Zero());
  const double wa = 0.5 / static_cast<double>(pa.size()), wb = 0.5 / static_cast<double>(pb.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const Vec3 d = pa[i] - pb[nn_ab[i]];
    sa += d.squaredNorm();
    r.grad_a[ia[i]] += 2.0 * wa * d;
  }
  for (std::size_t j = 0; j < pb.size(); ++j) {
    const Vec3 d = pa[nn_ba[j]] - pb[j];
    sb += d.squaredNorm();
    r.grad_a[ia[nn_ba[j]]] += 2.0 * wb * d;
  }
  r.value = wa * sa + wb * sb;
  return r;
}

double color_chamfer(std::span<const Vec3> a, std::span<const Vec3> b, int max_points, std::uint64_t seed) {
  return color_chamfer_grad(a, b, max_points, seed).value;
}

}  // namespace sidefield::texture
