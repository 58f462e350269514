#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace vidcount {

/// Chooses between the serial reference loops and the OpenMP kernels.
///
/// threads == 1 runs the serial reference path. Both paths must produce
/// identical results; the tests hold them to byte equality.
struct ExecutionPolicy {
  int threads = 1;

  bool parallel() const { return threads > 1; }

  static ExecutionPolicy serial() { return {1}; }
  static ExecutionPolicy with_threads(int n) { return {n < 1 ? 1 : n}; }
  // Hardware concurrency, capped by VIDCOUNT_THREADS when set.
  static ExecutionPolicy from_environment();
};

// Value of VIDCOUNT_THREADS, or 0 when unset or malformed.
int env_thread_cap();

/// Per-item exception slots for OpenMP loops, where exceptions must not cross
/// the parallel region. rethrow_first() rethrows the lowest-index failure so
/// error reporting does not depend on scheduling.
class ErrorSlots {
 public:
  explicit ErrorSlots(std::size_t n) : slots_(n) {}

  void capture(std::size_t i) { slots_[i] = std::current_exception(); }
  void rethrow_first() const {
    for (const auto& e : slots_) {
      if (e) std::rethrow_exception(e);
    }
  }

 private:
  std::vector<std::exception_ptr> slots_;
};

}  // namespace vidcount
