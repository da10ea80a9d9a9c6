#include "mlfdr/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace mlfdr {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

int default_thread_count() {
  if (const char* env = std::getenv("MLFDR_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t > 0) return t;
    } catch (...) {
    }
  }
  return omp_get_max_threads();
}

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ splitmix64(b + 0x2545f4914f6cdd1dULL));
  return h;
}

}  // namespace mlfdr
