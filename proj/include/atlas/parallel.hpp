#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace atlas {

// Worker cap from ATLAS_LAB_THREADS (0 or unset = hardware concurrency).
inline int worker_count() {
  int n = 0;
  if (const char* env = std::getenv("ATLAS_LAB_THREADS")) {
    try {
      n = std::stoi(env);
    } catch (...) {
      n = 0;
    }
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, n);
}

// out[i] = fn(i) for i in [0, n). Results land by index, so the output does not
// depend on scheduling. The first exception thrown by any task is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(int n, Fn&& fn) {
  std::vector<T> out(n);
  const int workers = std::min(worker_count(), std::max(n, 1));
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            out[i] = fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace atlas
