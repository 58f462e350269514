#include "vidcount/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "vidcount/errors.hpp"

namespace vidcount {

namespace {

CountingErrors errors_over(const std::vector<CountPair>& pairs) {
  if (pairs.empty()) throw MetricError("no count pairs to evaluate");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (const auto& p : pairs) {
    if (p.predicted < 0 || p.ground_truth < 0) throw MetricError("counts must be non-negative");
    const double e = double(p.predicted - p.ground_truth);
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const double n = double(pairs.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

double safe_iou(const BoundingBox& a, const BoundingBox& b) {
  if (a.area() <= 0.0 && b.area() <= 0.0) return 0.0;
  return box_iou(a, b);
}

}  // namespace

CountingErrors video_mae_rmse(const EvalInput& input) { return errors_over(input.pairs); }

CountingErrors multiclass_mae_rmse(const EvalInput& input) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : input.pairs) {
    if (!seen.emplace(p.video_id, p.category).second) {
      throw MetricError("duplicate category-video pair (" + p.video_id + ", " + p.category + ")");
    }
  }
  return errors_over(input.pairs);
}

MatchResult greedy_match(std::span<const Detection> dets, std::span<const BoundingBox> gts,
                         double iou_thresh) {
  MatchResult r;
  r.order.resize(dets.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<char> taken(gts.size(), 0);
  r.det_to_gt.assign(dets.size(), -1);
  for (std::size_t k = 0; k < r.order.size(); ++k) {
    const auto& d = dets[r.order[k]];
    int best = -1;
    double best_iou = iou_thresh;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double iou = safe_iou(d.box, gts[g]);
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best_iou = iou;
        best = int(g);
      }
    }
    if (best >= 0) {
      taken[std::size_t(best)] = 1;
      r.det_to_gt[k] = best;
      ++r.matches;
    }
  }
  return r;
}

double ap_at_iou(std::span<const Detection> dets, std::span<const BoundingBox> gts,
                 double iou_thresh) {
  if (!(iou_thresh >= 0.0 && iou_thresh <= 1.0)) throw MetricError("IoU threshold must be in [0, 1]");
  if (gts.empty()) return dets.empty() ? 1.0 : 0.0;
  if (dets.empty()) return 0.0;

  const MatchResult m = greedy_match(dets, gts, iou_thresh);
  const std::size_t n = dets.size();
  std::vector<double> recall(n), precision(n);
  double tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (m.det_to_gt[k] >= 0) tp += 1;
    recall[k] = tp / double(gts.size());
    precision[k] = tp / double(k + 1);
  }
  // Precision envelope: best precision at any recall to the right.
  for (std::size_t k = n - 1; k > 0; --k) precision[k - 1] = std::max(precision[k - 1], precision[k]);

  double sum = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[std::size_t(it - recall.begin())];
  }
  return sum / 101.0;
}

double ap_range(std::span<const Detection> dets, std::span<const BoundingBox> gts) {
  double sum = 0.0;
  for (int k = 0; k < 10; ++k) sum += ap_at_iou(dets, gts, (50 + 5 * k) / 100.0);
  return sum / 10.0;
}

double mean_image_ap(std::span<const ImageEval> images, double iou_thresh) {
  if (images.empty()) throw MetricError("no images to evaluate");
  double sum = 0.0;
  for (const auto& im : images) {
    sum += iou_thresh < 0 ? ap_range(im.dets, im.gts) : ap_at_iou(im.dets, im.gts, iou_thresh);
  }
  return sum / double(images.size());
}

}  // namespace vidcount
