#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dipnoise {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};  // 0 = hardware concurrency
  return cap;
}
inline bool& in_worker() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Caps the number of worker threads used by every parallel loop in the
/// library. 0 restores the default (hardware concurrency). Results never
/// depend on this value.
inline void set_max_threads(unsigned n) { detail::thread_cap().store(n); }

inline unsigned max_threads() {
  unsigned cap = detail::thread_cap().load();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : cap;
}

/// Runs body(b) for every block b in [0, n_blocks). Blocks are handed out
/// dynamically, so callers must write into per-block slots and reduce in
/// block order afterwards. Nested calls from inside a worker run serially.
template <class Body>
void parallel_for_blocks(std::size_t n_blocks, Body&& body) {
  const std::size_t workers =
      detail::in_worker() ? 1 : std::min<std::size_t>(max_threads(), n_blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) body(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run = [&] {
    const bool was = detail::in_worker();
    detail::in_worker() = true;
    try {
      for (std::size_t b = next++; b < n_blocks; b = next++) body(b);
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = n_blocks;
    }
    detail::in_worker() = was;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise (tree) reduction of per-block partials in a fixed topology:
/// the summation order depends only on parts.size().
template <class T, class Add>
T tree_reduce(std::vector<T> parts, Add add) {
  if (parts.empty()) return T{};
  while (parts.size() > 1) {
    std::size_t half = (parts.size() + 1) / 2;
    for (std::size_t i = 0; i + half < parts.size(); ++i) parts[i] = add(parts[i], parts[i + half]);
    parts.resize(half);
  }
  return parts.front();
}

inline double tree_sum(std::vector<double> parts) {
  return tree_reduce(std::move(parts), [](double a, double b) { return a + b; });
}

}  // namespace dipnoise
