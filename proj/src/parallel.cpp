#include "vidcount/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace vidcount {

int env_thread_cap() {
  const char* raw = std::getenv("VIDCOUNT_THREADS");
  if (!raw) return 0;
  int v = 0;
  auto [ptr, ec] = std::from_chars(raw, raw + std::strlen(raw), v);
  if (ec != std::errc() || *ptr != '\0' || v < 1) return 0;
  return v;
}

ExecutionPolicy ExecutionPolicy::from_environment() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const int cap = env_thread_cap(); cap > 0 && cap < n) n = cap;
  return with_threads(n);
}

}  // namespace vidcount
