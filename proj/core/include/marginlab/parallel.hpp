#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace marginlab {

// Runs fn(begin, end, chunk_index) over [0, count) split into contiguous
// chunks, one thread per chunk. jobs <= 1 runs inline. Results must be
// combined by the caller in chunk order so the outcome is independent of
// scheduling. The first exception thrown by any chunk is rethrown.
template <class Fn>
void parallel_chunks(std::int64_t count, int jobs, Fn&& fn) {
  if (count <= 0) return;
  const int workers =
      static_cast<int>(std::min<std::int64_t>(std::max(jobs, 1), count));
  if (workers == 1) {
    fn(std::int64_t{0}, count, 0);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::int64_t base = count / workers;
  const std::int64_t rem = count % workers;
  std::int64_t begin = 0;
  for (int c = 0; c < workers; ++c) {
    const std::int64_t len = base + (c < rem ? 1 : 0);
    const std::int64_t end = begin + len;
    threads.emplace_back([&fn, &errors, begin, end, c]() {
      try {
        fn(begin, end, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace marginlab
