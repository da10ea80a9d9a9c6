#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <vector>

namespace mlfdr {

enum class ExecutionPolicy { serial, parallel };

/// Thread count from MLFDR_THREADS, else the OpenMP default.
int default_thread_count();
void set_thread_count(int threads);

/// Stream seed for (master, a, b); distinct inputs give independent streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// Runs body(i) for i in [0, n). With the parallel policy iterations are
/// spread over OpenMP threads; each i writes only its own slot, so the result
/// does not depend on scheduling. The first exception by index is rethrown.
template <class Body>
void for_each_index(std::size_t n, ExecutionPolicy policy, Body&& body) {
  if (policy == ExecutionPolicy::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mlfdr
