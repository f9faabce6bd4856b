#include "sidefield/texture/consistent_edit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sidefield/core/error.hpp"
#include "sidefield/core/parallel.hpp"

namespace sidefield::texture {

void FeatureStack::validate() const {
  if (views.empty()) throw ContractViolation("feature stack is empty");
  if (yaws.size() != views.size()) throw ContractViolation("feature stack needs one yaw per view");
  for (const auto& v : views)
    if (v.rows() != views.front().rows() || v.cols() != views.front().cols())
      throw ContractViolation("feature stack views must share grid and channel width");
}

double cosine_distance(const RowVector& a, const RowVector& b) { return 1.0 - a.dot(b) / (a.norm() * b.norm()); }

namespace {

std::vector<int> match(const Matrix& query, const Matrix& key) {
  const Eigen::VectorXd qn = query.rowwise().norm(), kn = key.rowwise().norm();
  std::vector<int> out(static_cast<std::size_t>(query.rows()));
  parallel::for_each_index(query.rows(), [&](std::int64_t p) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index q = 0; q < key.rows(); ++q) {
      const double d = 1.0 - query.row(p).dot(key.row(q)) / (qn[p] * kn[q]);
      if (d < best) {
        best = d;
        arg = static_cast<int>(q);
      }
    }
    out[p] = arg;
  });
  return out;
}

}  // namespace

NNField nn_field(const FeatureStack& stack, const std::vector<int>& keys) {
  stack.validate();
  const int n = stack.view_count();
  if (keys.size() < 2) throw ContractViolation("nn_field needs at least two key views");
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (keys[k] < 0 || keys[k] >= n) throw ContractViolation("key view index out of range");
    if (k > 0 && keys[k] <= keys[k - 1]) throw ContractViolation("key views must be sorted and distinct");
  }
  for (int v = 0; v < n; ++v)
    for (Eigen::Index p = 0; p < stack.views[v].rows(); ++p)
      if (stack.views[v].row(p).squaredNorm() == 0.0)
        throw ContractViolation("zero-norm feature at view " + std::to_string(v) + ", location " + std::to_string(p));

  NNField f;
  f.prev_key.resize(n);
  f.next_key.resize(n);
  f.prev_match.resize(n);
  f.next_match.resize(n);
  f.weight.assign(n, 0.5);
  std::vector<int> identity(static_cast<std::size_t>(stack.locations()));
  for (std::size_t p = 0; p < identity.size(); ++p) identity[p] = static_cast<int>(p);
  for (int v = 0; v < n; ++v) {
    auto after = std::lower_bound(keys.begin(), keys.end(), v);
    if (after != keys.end() && *after == v) {
      f.prev_key[v] = f.next_key[v] = v;
      f.prev_match[v] = f.next_match[v] = identity;
      continue;
    }
    int prev, next;
    if (after == keys.begin()) prev = next = keys.front();
    else if (after == keys.end()) prev = next = keys.back();
    else {
      prev = *(after - 1);
      next = *after;
      const double span = stack.yaws[next] - stack.yaws[prev];
      if (!(span > 0.0)) throw ContractViolation("key view yaws must increase");
      f.weight[v] = (stack.yaws[v] - stack.yaws[prev]) / span;
    }
    f.prev_key[v] = prev;
    f.next_key[v] = next;
    f.next_match[v] = match(stack.views[v], stack.views[next]);
    f.prev_match[v] = prev == next ? f.next_match[v] : match(stack.views[v], stack.views[prev]);
  }
  return f;
}

Matrix propagate(const std::vector<Matrix>& edited, int view, const NNField& field) {
  const int next = field.next_key.at(view), prev = field.prev_key.at(view);
  const double w = field.weight[view];
  const auto& nm = field.next_match[view];
  const auto& pm = field.prev_match[view];
  const Matrix& en = edited.at(next);
  const Matrix& ep = edited.at(prev);
  if (en.cols() != ep.cols()) throw ContractViolation("propagate: key features differ in width");
  Matrix out(static_cast<Eigen::Index>(nm.size()), en.cols());
  for (std::size_t p = 0; p < nm.size(); ++p)
    for (Eigen::Index c = 0; c < en.cols(); ++c) {
      const double a = en(nm[p], c), b = ep(pm[p], c);
      out(p, c) = a == b ? a : w * a + (1.0 - w) * b;
    }
  return out;
}

Matrix patch_descriptors(const ViewImage& view) {
  const Image& img = view.rgb;
  const int h = img.height, w = img.width;
  Matrix d(static_cast<Eigen::Index>(h) * w, 29);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Index r = static_cast<Eigen::Index>(y) * w + x;
      int col = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = std::clamp(y + dy, 0, h - 1), xx = std::clamp(x + dx, 0, w - 1);
          for (int c = 0; c < 3; ++c) d(r, col++) = img.at(yy, xx, c);
        }
      d(r, col++) = view.mask.empty() ? 1.0 : (view.mask[static_cast<std::size_t>(r)] ? 1.0 : 0.0);
      d(r, col) = 1.0;
    }
  return d;
}

}  // namespace sidefield::texture
