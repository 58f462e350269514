// Serial reference vs OpenMP kernels on a synthetic busy scene.
#include <benchmark/benchmark.h>

#include <memory>

#include "vidcount/pipeline.hpp"
#include "vidcount/simulator.hpp"

using namespace vidcount;

namespace {

struct Scene {
  std::shared_ptr<const ScenePack> pack;
  std::shared_ptr<const NoisyDetections> dets;
  std::unique_ptr<SyntheticDetector> detector;
  std::unique_ptr<OracleTracker> tracker;
  FramePlan plan;
  Prompt prompt{std::string("object"), {}};
  FrameDetections stage1;
};

const Scene& scene() {
  static const Scene s = [] {
    Scene s;
    SceneConfig cfg;
    cfg.seed = 3;
    cfg.height = 256;
    cfg.width = 256;
    cfg.n_objects = 40;
    cfg.n_frames = 60;
    cfg.entry_last = 30;
    cfg.allow_reentry = true;
    NoiseConfig noise;
    noise.seed = 3;
    noise.fp_rate = 2.0;
    noise.fp_lifetimes = {1, 2};
    noise.jitter_sigma = 0.5;
    s.pack = std::make_shared<const ScenePack>(generate_scene(cfg));
    s.dets = std::make_shared<const NoisyDetections>(synth_detect(*s.pack, noise));
    s.detector = std::make_unique<SyntheticDetector>(s.pack, s.dets);
    s.tracker = std::make_unique<OracleTracker>(s.pack, s.dets, noise);
    s.plan = plan_frames(cfg.n_frames, 3.0, 3.0);
    s.stage1 = run_stage1(s.plan, s.prompt, *s.detector, *s.detector, 0.23).frames;
    return s;
  }();
  return s;
}

ExecutionPolicy policy_for(const benchmark::State& state) {
  return state.range(0) <= 1 ? ExecutionPolicy::serial()
                             : ExecutionPolicy::with_threads(int(state.range(0)));
}

void BM_Stage1(benchmark::State& state) {
  const auto& s = scene();
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_stage1(s.plan, s.prompt, *s.detector, *s.detector, 0.23, policy_for(state)));
  }
}

void BM_TemporalFilter(benchmark::State& state) {
  const auto& s = scene();
  for (auto _ : state) {
    benchmark::DoNotOptimize(temporal_filter(s.stage1, *s.tracker, 3, 0.5, policy_for(state)));
  }
}

void BM_AssociateAndCount(benchmark::State& state) {
  const auto& s = scene();
  for (auto _ : state) {
    benchmark::DoNotOptimize(associate_and_count(s.stage1, *s.tracker, 0.5, policy_for(state)));
  }
}

}  // namespace

// Arg is the thread count; 1 runs the serial reference path.
BENCHMARK(BM_Stage1)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TemporalFilter)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssociateAndCount)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
