#include "sidefield/core/parallel.hpp"

#include <atomic>

#include <omp.h>

namespace sidefield::parallel {

namespace {
std::atomic<bool> g_sequential{false};
}

void set_sequential(bool on) { g_sequential = on; }
bool sequential() { return g_sequential; }
int max_threads() { return sequential() ? 1 : omp_get_max_threads(); }

}  // namespace sidefield::parallel
