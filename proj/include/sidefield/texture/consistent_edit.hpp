#pragma once

#include <vector>

#include "sidefield/core/types.hpp"
#include "sidefield/texture/render.hpp"

namespace sidefield::texture {

/// One locations x channels feature matrix per view, all on the same grid.
struct FeatureStack {
  std::vector<Matrix> views;
  std::vector<double> yaws;  // one per view, increasing

  int view_count() const { return static_cast<int>(views.size()); }
  int locations() const { return views.empty() ? 0 : static_cast<int>(views.front().rows()); }
  void validate() const;
};

/// For each view: the adjacent key views before and after it, the
/// nearest-neighbour location in each for every location of the view, and the
/// blend weight of the following key view. Key views map onto themselves.
/// Views outside the key range use the nearest key on both sides with weight 0.5.
struct NNField {
  std::vector<int> prev_key, next_key;
  std::vector<std::vector<int>> prev_match, next_match;
  std::vector<double> weight;
};

/// Cosine distance 1 - a.b / (|a| |b|).
double cosine_distance(const RowVector& a, const RowVector& b);

/// Nearest neighbours by cosine distance, ties to the lowest location index.
/// Needs at least two sorted, distinct key views. Throws ContractViolation
/// naming the view and location of any zero-norm feature.
NNField nn_field(const FeatureStack& stack, const std::vector<int>& key_views);

/// weight * next[next_match[p]] + (1 - weight) * prev[prev_match[p]], gathered
/// from the edited features of the two adjacent key views.
Matrix propagate(const std::vector<Matrix>& edited, int view, const NNField& field);

/// 3x3 RGB patch (edge-clamped) plus the mask value and a constant 1, so no
/// descriptor has zero norm. Rows follow pixel order.
Matrix patch_descriptors(const ViewImage& view);

}  // namespace sidefield::texture
