#pragma once

#include <cstdint>

namespace sidefield::parallel {

/// Forces every kernel onto a single thread. Kernels are written so that
/// results do not depend on the thread count; this switch exists for timing
/// comparisons and golden-file runs.
void set_sequential(bool on);
bool sequential();

int max_threads();

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs.
template <typename Body>
void for_each_index(std::int64_t n, Body&& body) {
  if (sequential()) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace sidefield::parallel
