#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "fixtures.hpp"
#include "vidcount/parallel.hpp"
#include "vidcount/pipeline.hpp"

using namespace vidcount;

namespace {

// Everything a run produces, serialized.
std::string run_bytes(ExecutionPolicy policy, CausalMode mode) {
  SceneConfig cfg;
  cfg.seed = 21;
  cfg.n_objects = 25;
  cfg.n_frames = 24;
  cfg.entry_last = 16;
  cfg.allow_reentry = true;
  NoiseConfig noise;
  noise.fp_rate = 1.0;
  noise.fp_lifetimes = {1, 2, 4};
  noise.jitter_sigma = 0.7;
  noise.p_miss = 0.1;
  noise.id_switch_prob = 0.2;
  noise.seed = 21;
  auto w = fixture::world(generate_scene(cfg), noise);
  RunConfig rc;
  rc.causal_mode = mode;
  const auto r = run_pipeline(plan_frames(24, 3, 3), Prompt{std::string("object"), {}}, *w.detector,
                              *w.detector, *w.tracker, rc, policy);
  std::ostringstream out;
  write_count_report(out, r.long_term.report);
  write_masklets(out, r.long_term.masklets);
  for (const auto& [f, list] : r.stage1.frames) write_detections(out, list);
  for (const auto& s : r.stream) out << s.frame << ' ' << s.emitted_at << ' ' << s.global_count << '\n';
  return out.str();
}

}  // namespace

TEST(Parallel, PipelineBytesIndependentOfThreads) {
  for (auto mode : {CausalMode::offline, CausalMode::lagged, CausalMode::immediate}) {
    const std::string serial = run_bytes(ExecutionPolicy::serial(), mode);
    EXPECT_EQ(serial, run_bytes(ExecutionPolicy::serial(), mode));
    for (int threads : {2, 3, 8}) EXPECT_EQ(serial, run_bytes(ExecutionPolicy::with_threads(threads), mode));
  }
}

TEST(Parallel, PolicyBasics) {
  EXPECT_FALSE(ExecutionPolicy::serial().parallel());
  EXPECT_TRUE(ExecutionPolicy::with_threads(2).parallel());
  EXPECT_EQ(ExecutionPolicy::with_threads(0).threads, 1);
}

TEST(Parallel, EnvironmentCap) {
  ::setenv("VIDCOUNT_THREADS", "1", 1);
  EXPECT_EQ(env_thread_cap(), 1);
  EXPECT_EQ(ExecutionPolicy::from_environment().threads, 1);
  ::setenv("VIDCOUNT_THREADS", "junk", 1);
  EXPECT_EQ(env_thread_cap(), 0);
  ::unsetenv("VIDCOUNT_THREADS");
  EXPECT_EQ(env_thread_cap(), 0);
  EXPECT_GE(ExecutionPolicy::from_environment().threads, 1);
}

TEST(Parallel, ErrorSlotsRethrowLowestIndex) {
  ErrorSlots slots(4);
  for (std::size_t i : {3u, 1u}) {
    try {
      throw std::runtime_error("item " + std::to_string(i));
    } catch (...) {
      slots.capture(i);
    }
  }
  try {
    slots.rethrow_first();
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "item 1");
  }
  EXPECT_NO_THROW(ErrorSlots(3).rethrow_first());
}
