#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace kubo {

/// Worker count used by grid sums when the caller does not pass one. 0 means hardware concurrency.
void set_default_jobs(unsigned jobs);
unsigned default_jobs();

/// Runs body(i) for i in [0, n) on a bounded pool. Each index is processed exactly once;
/// results must be written to per-index slots so the caller controls the reduction order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned jobs = 0);

/// Chunked sum with a fixed chunking and in-order reduction: bitwise reproducible for any job count.
template <class T, class F>
T chunked_sum(std::size_t n, F&& term, std::size_t chunk = 4096, unsigned jobs = 0) {
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  std::vector<T> partial(nchunks, T{});
  parallel_for(
      nchunks,
      [&](std::size_t c) {
        T acc{};
        const std::size_t hi = std::min(n, (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < hi; ++i) acc += term(i);
        partial[c] = acc;
      },
      jobs);
  T total{};
  for (const auto& p : partial) total += p;
  return total;
}

}  // namespace kubo
