#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vidcount/frame_detection.hpp"
#include "vidcount/geometry.hpp"
#include "vidcount/parallel.hpp"

namespace vidcount {

struct Propagation {
  BinaryMask mask;  // empty when absent
  bool present = false;

  friend bool operator==(const Propagation&, const Propagation&) = default;
};

/// Mask propagation model (segment-and-track).
///
/// propagate() follows the object under anchor_mask on anchor_frame to each
/// target frame and returns one Propagation per target, in target order.
/// Targets are listed moving away from the anchor. Implementations must be
/// deterministic and safe to call concurrently.
class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual std::vector<Propagation> propagate(int anchor_frame, const BinaryMask& anchor_mask,
                                             std::span<const int> targets) const = 0;
};

struct FilterVerdict {
  std::string detection_id;
  int frame = 0;
  bool kept = false;
  std::vector<int> matched_frames;  // window frames (anchor included) with a match
  int longest_run = 0;              // consecutive matched frames through the anchor
  bool tracker_failed = false;      // failure keeps the detection

  friend bool operator==(const FilterVerdict&, const FilterVerdict&) = default;
};

struct FilterResult {
  FrameDetections filtered;  // same frame keys as the input
  std::vector<FilterVerdict> verdicts;  // frame order, then detection order
  std::size_t kept = 0;
  std::size_t removed = 0;
};

// Temporal false-positive filter. Each detection at kept-frame position p is
// propagated to the w-1 kept frames before and after it (clamped to the
// video). A window frame matches when the propagated mask has IoU strictly
// greater than match_iou with some detection mask on that frame; the anchor
// always matches. The detection is kept iff the matched run through the
// anchor spans at least w frames.
FilterResult temporal_filter(const FrameDetections& stage1, const Tracker& tracker, int w,
                             double match_iou,
                             ExecutionPolicy policy = ExecutionPolicy::serial());

// Verdict for one detection at kept-frame position `position` of `frames`,
// using only the frames listed there. Building block for streaming use.
FilterVerdict filter_detection(const FrameDetections& stage1, std::span<const int> frames,
                               std::size_t position, const Detection& detection,
                               const Tracker& tracker, int w, double match_iou);

struct WindowSweepRow {
  int w = 0;
  std::size_t kept = 0;
  std::size_t removed = 0;

  friend bool operator==(const WindowSweepRow&, const WindowSweepRow&) = default;
};

std::vector<WindowSweepRow> sweep_window(const FrameDetections& stage1, const Tracker& tracker,
                                         std::span<const int> w_values, double match_iou,
                                         ExecutionPolicy policy = ExecutionPolicy::serial());

}  // namespace vidcount
