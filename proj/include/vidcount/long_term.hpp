#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vidcount/frame_detection.hpp"
#include "vidcount/interchange.hpp"
#include "vidcount/parallel.hpp"
#include "vidcount/temporal_filter.hpp"

namespace vidcount {

/// What happened to one filtered detection in the long-term stage.
struct Association {
  std::string detection_id;
  int frame = 0;
  int masklet_id = 0;   // matched masklet, or the masklet it spawned
  bool spawned = false;
  double best_iou = 0.0;  // max IoU against masklets existing when it was checked

  friend bool operator==(const Association&, const Association&) = default;
};

struct LongTermResult {
  CountReport report;
  std::vector<Masklet> masklets;  // index == masklet_id
  std::vector<Association> associations;
};

/// Frame-sequential masklet store.
///
/// Each ingested frame first propagates every live masklet to that frame
/// (from the masklet's birth mask, so an object that leaves and comes back
/// keeps its identity), then checks the frame's detections in descending
/// score order. A detection whose best IoU against all masklet masks on the
/// frame is <= new_object_iou spawns a new masklet, which immediately takes
/// part in checking the remaining detections of the same frame. Masklets are
/// never retired.
class LongTermCounter {
 public:
  LongTermCounter(const Tracker& tracker, double new_object_iou,
                  ExecutionPolicy policy = ExecutionPolicy::serial());

  // Frames must arrive in strictly increasing order.
  void ingest(int frame, const std::vector<Detection>& detections);

  int global_count() const { return report_.global_count; }
  const CountReport& report() const { return report_; }
  const std::vector<Masklet>& masklets() const { return masklets_; }

  LongTermResult finish() &&;

 private:
  const Tracker* tracker_;
  double new_object_iou_;
  ExecutionPolicy policy_;
  int last_frame_ = -1;
  CountReport report_;
  std::vector<Masklet> masklets_;
  std::vector<Association> associations_;
};

LongTermResult associate_and_count(const FrameDetections& filtered, const Tracker& tracker,
                                   double new_object_iou,
                                   ExecutionPolicy policy = ExecutionPolicy::serial());

/// One value of a causal count stream. `frame` is the frame the count refers
/// to; `emitted_at` is the latest frame whose Stage 1 output had to be seen
/// before the value could be produced.
struct CausalSample {
  int frame = 0;
  int emitted_at = 0;
  int global_count = 0;

  friend bool operator==(const CausalSample&, const CausalSample&) = default;
};

struct CausalParams {
  int w = 3;
  double match_iou = 0.5;
  double new_object_iou = 0.5;
};

/// Streaming counter for causal operation.
///
/// immediate: the temporal filter is skipped; each pushed frame goes straight
/// into the long-term stage and its count is emitted at once.
/// lagged: the frame at kept position r is filtered and counted once the
/// frame at position r + w has arrived, which guarantees its whole filter
/// window is available. finish() flushes the tail, so the last emitted value
/// equals the offline count.
class CausalCounter {
 public:
  CausalCounter(CausalMode mode, const Tracker& tracker, CausalParams params,
                ExecutionPolicy policy = ExecutionPolicy::serial());

  std::vector<CausalSample> push(int frame, std::vector<Detection> detections);
  std::vector<CausalSample> finish();

  const LongTermCounter& counter() const { return counter_; }

 private:
  CausalSample process(std::size_t position, int emitted_at);

  CausalMode mode_;
  const Tracker* tracker_;
  CausalParams params_;
  LongTermCounter counter_;
  FrameDetections history_;
  std::vector<int> frames_;
  std::size_t next_position_ = 0;  // first position not yet counted
};

// Runs a CausalCounter over already computed Stage 1 output. mode must be
// lagged or immediate (ContractError otherwise).
std::vector<CausalSample> causal_count(CausalMode mode, const FrameDetections& stage1,
                                       const Tracker& tracker, CausalParams params,
                                       ExecutionPolicy policy = ExecutionPolicy::serial());

}  // namespace vidcount
