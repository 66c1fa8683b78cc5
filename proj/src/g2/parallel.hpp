#pragma once

#include <cstddef>
#include <functional>

namespace g2 {

/// Worker count used by parallel_for. Results never depend on it: every
/// kernel writes disjoint per-point outputs and reductions run serially.
void set_thread_count(int n);
int thread_count();

/// Calls body(begin, end) over a static partition of [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace g2
