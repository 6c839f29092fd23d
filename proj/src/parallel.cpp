#include "moco5d/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace moco5d {

namespace {
int initial_threads()
{
  if (char const *env = std::getenv("MOCO5D_THREADS")) {
    int const n = std::atoi(env);
    if (n > 0) { return n; }
  }
  return 1;
}

std::atomic<int> &threads()
{
  static std::atomic<int> n{initial_threads()};
  return n;
}
} // namespace

int thread_count() { return threads().load(); }

void set_thread_count(int n)
{
  if (n < 1) { throw DomainError("thread count must be >= 1"); }
  threads().store(n);
}

void parallel_for(Index n, std::function<void(Index, Index, int)> const &fn)
{
  int const workers = static_cast<int>(std::min<Index>(thread_count(), std::max<Index>(n, 1)));
  if (workers <= 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  Index const chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; w++) {
    Index const lo = std::min(n, w * chunk);
    Index const hi = std::min(n, lo + chunk);
    pool.emplace_back([&fn, lo, hi, w] { fn(lo, hi, w); });
  }
  for (auto &t : pool) { t.join(); }
}

} // namespace moco5d
