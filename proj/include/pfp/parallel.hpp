#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace pfp {

/// Runs fn(i) for i in [0, count) on up to `threads` threads, striding the
/// index space. Callers write results into per-index slots, so the outcome
/// does not depend on scheduling.
template <typename Fn>
void parallel_for(Eigen::Index count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<Eigen::Index>(1, count))));
  if (threads == 1) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (Eigen::Index i = w; i < count; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace pfp
