#pragma once

#include "common.hpp"

#include <functional>
#include <vector>

namespace moco5d {

/// Worker count used by data-parallel loops. Defaults to MOCO5D_THREADS or 1.
int thread_count();
void set_thread_count(int n);

/// Splits [0, n) into contiguous chunks, one per worker. fn(begin, end, worker).
/// Chunk boundaries depend only on n and the worker count, so reductions that sum
/// per-worker partials in worker order are reproducible for a fixed thread count.
void parallel_for(Index n, std::function<void(Index, Index, int)> const &fn);

/// Sums per-worker partial buffers into out, in worker order.
template <typename T>
void reduce_partials(std::vector<std::vector<T>> const &partials, std::vector<T> &out)
{
  for (auto const &p : partials) {
    for (size_t i = 0; i < out.size(); i++) {
      out[i] += p[i];
    }
  }
}

} // namespace moco5d
