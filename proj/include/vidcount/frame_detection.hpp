#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "vidcount/geometry.hpp"
#include "vidcount/interchange.hpp"
#include "vidcount/parallel.hpp"

namespace vidcount {

/// One raw detector output before thresholding and segmentation.
struct Candidate {
  BoundingBox box;
  double score = 0.0;
  std::string label;
  std::string id;  // optional; Stage 1 assigns "f<frame>-<k>" when empty
};

/// Per-frame counting/detection model. Implementations must be deterministic
/// and safe to call concurrently for different frames.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Candidate> detect(int frame, const Prompt& prompt) const = 0;
};

/// Box-prompted segmentation model. Must return a mask on the video grid; the
/// mask may be empty. Same determinism and thread-safety contract as Detector.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual BinaryMask segment(int frame, const BoundingBox& box) const = 0;
};

struct FramePlan {
  double source_fps = 0.0;
  double target_fps = 0.0;
  int total_frames = 0;
  std::vector<int> kept_indices;  // strictly increasing, starts at 0
};

// Keeps round(k * source_fps / target_fps) for k = 0, 1, ... while the
// unrounded position stays inside the video, deduplicated. Keeps every frame
// when target_fps >= source_fps. Throws ConfigError on non-positive rates or
// an empty video.
FramePlan plan_frames(int total_frames, double source_fps, double target_fps);

// Kept frame -> detections on that frame, in detector order.
using FrameDetections = std::map<int, std::vector<Detection>>;

struct Stage1Diagnostics {
  std::size_t below_threshold = 0;
  std::size_t empty_masks = 0;
};

struct Stage1Result {
  FrameDetections frames;  // one entry per kept frame, possibly empty
  Stage1Diagnostics diagnostics;
};

// Detects on every kept frame, keeps scores >= score_threshold, and pairs each
// survivor with its segmenter mask. Empty masks are dropped. A provider
// exception becomes a StageError naming the frame.
Stage1Result run_stage1(const FramePlan& plan, const Prompt& prompt, const Detector& detector,
                        const Segmenter& segmenter, double score_threshold,
                        ExecutionPolicy policy = ExecutionPolicy::serial());

/// Detector and segmenter replaying precomputed records, which is how
/// external neural models feed the engine. segment() returns the recorded
/// mask of the detection with the same box on that frame, or rasterizes the
/// box when no mask was recorded.
class RecordedDetections final : public Detector, public Segmenter {
 public:
  // Throws ShapeError when a recorded mask is not on the height x width grid.
  RecordedDetections(std::vector<Detection> detections, int height, int width);

  std::vector<Candidate> detect(int frame, const Prompt& prompt) const override;
  BinaryMask segment(int frame, const BoundingBox& box) const override;

  int frame_count() const;  // one past the last frame with a record

 private:
  int height_;
  int width_;
  std::map<int, std::vector<Detection>> by_frame_;
};

}  // namespace vidcount
