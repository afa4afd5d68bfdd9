#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace binpercept {

/// Process-wide worker count used by row-parallel loops. 1 means serial.
void set_thread_count(int n);
int thread_count();

/// Runs fn(row) for every row in [0, rows). Rows are split into contiguous
/// blocks; fn must only write state owned by its row so the result does not
/// depend on scheduling.
template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  const int workers = std::min(thread_count(), rows);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const int block = (rows + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const int begin = t * block;
    const int end = std::min(rows, begin + block);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (int r = begin; r < end; ++r) fn(r);
    });
  }
}

}  // namespace binpercept
