// Small scene builders and scripted providers shared by the unit tests.
#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "vidcount/simulator.hpp"
#include "vidcount/temporal_filter.hpp"

namespace fixture {

using namespace vidcount;

struct Span {
  int first = 0;
  int last = 0;
  BoundingBox box;
};

// Track visible on the listed frame spans with a fixed box.
inline GroundTruthTrack track(std::string id, int h, int w, std::vector<Span> spans,
                              std::string category = "object") {
  GroundTruthTrack t{std::move(id), std::move(category), {}};
  for (const auto& s : spans) {
    for (int f = s.first; f <= s.last; ++f) t.per_frame.emplace(f, rasterize_box(h, w, s.box));
  }
  return t;
}

struct World {
  std::shared_ptr<const ScenePack> scene;
  std::shared_ptr<const NoisyDetections> dets;
  std::shared_ptr<SyntheticDetector> detector;
  std::shared_ptr<OracleTracker> tracker;
};

inline World world(ScenePack pack, const NoiseConfig& noise = {}) {
  World w;
  w.scene = std::make_shared<const ScenePack>(std::move(pack));
  w.dets = std::make_shared<const NoisyDetections>(synth_detect(*w.scene, noise));
  w.detector = std::make_shared<SyntheticDetector>(w.scene, w.dets);
  w.tracker = std::make_shared<OracleTracker>(w.scene, w.dets, noise);
  return w;
}

// Stage 1 output for every frame straight from simulated detections.
inline FrameDetections stage1_of(const NoisyDetections& dets) {
  FrameDetections out;
  for (const auto& [f, list] : dets.per_frame) {
    auto& v = out[f];
    for (const auto& sd : list) v.push_back(sd.detection);
  }
  return out;
}

inline Detection detection(int frame, const BinaryMask& mask, double score, std::string id) {
  Detection d;
  d.frame = frame;
  d.box = mask.bounds().value_or(BoundingBox{});
  d.score = score;
  d.label = "object";
  d.mask = mask;
  d.id = std::move(id);
  return d;
}

/// Tracker answering from a callback, counting calls.
class ScriptedTracker final : public Tracker {
 public:
  using Fn = std::function<Propagation(int anchor, const BinaryMask& mask, int target)>;
  explicit ScriptedTracker(Fn fn) : fn_(std::move(fn)) {}

  std::vector<Propagation> propagate(int anchor, const BinaryMask& mask,
                                     std::span<const int> targets) const override {
    ++calls;
    std::vector<Propagation> out;
    for (int t : targets) out.push_back(fn_(anchor, mask, t));
    return out;
  }

  mutable std::atomic<int> calls{0};

 private:
  Fn fn_;
};

}  // namespace fixture
