#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vidcount/geometry.hpp"
#include "vidcount/interchange.hpp"

namespace vidcount {

struct CountPair {
  std::int64_t predicted = 0;
  std::int64_t ground_truth = 0;
  std::string category;
  std::string video_id;
};

struct EvalInput {
  std::vector<CountPair> pairs;
};

struct CountingErrors {
  double mae = 0.0;
  double rmse = 0.0;
};

// MAE = mean |pred - gt|, RMSE = sqrt(mean (pred - gt)^2) over videos.
// Throws MetricError on empty input or negative counts.
CountingErrors video_mae_rmse(const EvalInput& input);

// Same formulas with each (video, category) pair as one unit. Throws
// MetricError when a pair appears twice.
CountingErrors multiclass_mae_rmse(const EvalInput& input);

/// Greedy score-ordered matching result. det_to_gt[i] refers to the i-th
/// detection in descending score order (stable), -1 when unmatched.
struct MatchResult {
  std::vector<std::size_t> order;  // detection indices by descending score
  std::vector<int> det_to_gt;
  int matches = 0;
};

// Each detection, in descending score order, takes the unmatched ground truth
// with the highest IoU (lowest index on ties) if that IoU >= iou_thresh.
MatchResult greedy_match(std::span<const Detection> dets, std::span<const BoundingBox> gts,
                         double iou_thresh);

// 101-point interpolated average precision for one image. Empty ground truth
// scores 1.0 with no detections and 0.0 otherwise.
double ap_at_iou(std::span<const Detection> dets, std::span<const BoundingBox> gts,
                 double iou_thresh);

// Mean of ap_at_iou over thresholds 0.50, 0.55, ..., 0.95.
double ap_range(std::span<const Detection> dets, std::span<const BoundingBox> gts);

struct ImageEval {
  std::vector<Detection> dets;
  std::vector<BoundingBox> gts;
};

// Per-image AP averaged over images; iou_thresh < 0 selects ap_range.
double mean_image_ap(std::span<const ImageEval> images, double iou_thresh);

}  // namespace vidcount
