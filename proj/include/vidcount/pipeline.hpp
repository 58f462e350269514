#pragma once

#include <optional>
#include <span>
#include <vector>

#include "vidcount/frame_detection.hpp"
#include "vidcount/interchange.hpp"
#include "vidcount/long_term.hpp"
#include "vidcount/parallel.hpp"
#include "vidcount/temporal_filter.hpp"

namespace vidcount {

struct PipelineResult {
  FramePlan plan;
  Stage1Result stage1;
  std::optional<FilterResult> filter;  // offline mode with the filter enabled
  LongTermResult long_term;
  std::vector<CausalSample> stream;  // lagged and immediate modes
};

// Frame plan -> detection + segmentation -> temporal filter -> long-term
// tracking. The config's causal_mode picks the offline batch path or a
// CausalCounter stream. use_filter = false skips the temporal filter in
// offline mode (immediate mode always skips it).
PipelineResult run_pipeline(const FramePlan& plan, const Prompt& prompt, const Detector& detector,
                            const Segmenter& segmenter, const Tracker& tracker,
                            const RunConfig& config,
                            ExecutionPolicy policy = ExecutionPolicy::serial(),
                            bool use_filter = true);

struct FpsSweepRow {
  double target_fps = 0.0;
  std::size_t kept_frames = 0;
  int global_count = 0;

  friend bool operator==(const FpsSweepRow&, const FpsSweepRow&) = default;
};

// Reruns the pipeline once per target rate.
std::vector<FpsSweepRow> sweep_fps(int total_frames, double source_fps,
                                   std::span<const double> target_rates, const Prompt& prompt,
                                   const Detector& detector, const Segmenter& segmenter,
                                   const Tracker& tracker, const RunConfig& config,
                                   ExecutionPolicy policy = ExecutionPolicy::serial());

/// Tracker for file-only runs with no propagation model: follows an object by
/// hopping to the detection mask with the highest IoU on each successive
/// frame of the detections map. A frame with no link >= link_iou leaves the
/// object absent there and the search continues from the last linked mask.
class IouChainTracker final : public Tracker {
 public:
  explicit IouChainTracker(FrameDetections detections, double link_iou = 0.3);

  std::vector<Propagation> propagate(int anchor_frame, const BinaryMask& anchor_mask,
                                     std::span<const int> targets) const override;

 private:
  FrameDetections detections_;
  double link_iou_;
};

}  // namespace vidcount
