#include "vidcount/temporal_filter.hpp"

#include <algorithm>

#include "vidcount/errors.hpp"

namespace vidcount {

namespace {

void check_params(int w, double match_iou) {
  if (w < 1) throw ConfigError("filter_window_w", "must be >= 1");
  if (!(match_iou >= 0.0 && match_iou <= 1.0)) throw ConfigError("match_iou", "must be in [0, 1]");
}

bool matches_any(const Propagation& p, const std::vector<Detection>& on_frame, double match_iou) {
  if (!p.present || p.mask.empty()) return false;
  for (const auto& d : on_frame) {
    if (d.mask && mask_iou(p.mask, *d.mask) > match_iou) return true;
  }
  return false;
}

const std::vector<Detection>& detections_on(const FrameDetections& stage1, int frame) {
  static const std::vector<Detection> none;
  auto it = stage1.find(frame);
  return it == stage1.end() ? none : it->second;
}

}  // namespace

FilterVerdict filter_detection(const FrameDetections& stage1, std::span<const int> frames,
                               std::size_t position, const Detection& detection,
                               const Tracker& tracker, int w, double match_iou) {
  FilterVerdict v;
  v.detection_id = detection.id;
  v.frame = detection.frame;

  const std::size_t reach = std::size_t(w - 1);
  const std::size_t lo = position >= reach ? position - reach : 0;
  const std::size_t hi = std::min(frames.size() - 1, position + reach);

  // matched[k] refers to frames[lo + k].
  std::vector<char> matched(hi - lo + 1, 0);
  matched[position - lo] = 1;

  if (w > 1) {
    try {
      if (!detection.mask || detection.mask->empty()) {
        throw ContractError("detection has no mask");
      }
      std::vector<int> backward, forward;
      for (std::size_t p = position; p > lo; --p) backward.push_back(frames[p - 1]);
      for (std::size_t p = position + 1; p <= hi; ++p) forward.push_back(frames[p]);

      auto scan = [&](const std::vector<int>& targets, bool going_back) {
        if (targets.empty()) return;
        const auto props = tracker.propagate(detection.frame, *detection.mask, targets);
        if (props.size() != targets.size()) {
          throw ContractError("tracker returned " + std::to_string(props.size()) + " results for " +
                              std::to_string(targets.size()) + " targets");
        }
        for (std::size_t k = 0; k < targets.size(); ++k) {
          const std::size_t pos = going_back ? position - 1 - k : position + 1 + k;
          matched[pos - lo] = matches_any(props[k], detections_on(stage1, targets[k]), match_iou);
        }
      };
      scan(backward, true);
      scan(forward, false);
    } catch (const std::exception&) {
      v.tracker_failed = true;
      v.kept = true;
      v.matched_frames = {detection.frame};
      v.longest_run = 1;
      return v;
    }
  }

  for (std::size_t k = 0; k < matched.size(); ++k) {
    if (matched[k]) v.matched_frames.push_back(frames[lo + k]);
  }
  std::size_t left = position - lo, right = position - lo;
  while (left > 0 && matched[left - 1]) --left;
  while (right + 1 < matched.size() && matched[right + 1]) ++right;
  v.longest_run = int(right - left + 1);
  v.kept = v.longest_run >= w;
  return v;
}

FilterResult temporal_filter(const FrameDetections& stage1, const Tracker& tracker, int w,
                             double match_iou, ExecutionPolicy policy) {
  check_params(w, match_iou);

  std::vector<int> frames;
  frames.reserve(stage1.size());
  for (const auto& entry : stage1) frames.push_back(entry.first);

  // Flatten (position, detection) so the parallel loop has one item per detection.
  struct Item {
    std::size_t position;
    const Detection* detection;
  };
  std::vector<Item> items;
  {
    std::size_t p = 0;
    for (const auto& [frame, dets] : stage1) {
      for (const auto& d : dets) items.push_back({p, &d});
      ++p;
    }
  }

  std::vector<FilterVerdict> verdicts(items.size());
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  if (!policy.parallel()) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& it = items[std::size_t(i)];
      verdicts[std::size_t(i)] =
          filter_detection(stage1, frames, it.position, *it.detection, tracker, w, match_iou);
    }
  } else {
    ErrorSlots errors(items.size());
#pragma omp parallel for schedule(dynamic, 4) num_threads(policy.threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        const auto& it = items[std::size_t(i)];
        verdicts[std::size_t(i)] =
            filter_detection(stage1, frames, it.position, *it.detection, tracker, w, match_iou);
      } catch (...) {
        errors.capture(std::size_t(i));
      }
    }
    errors.rethrow_first();
  }

  FilterResult result;
  std::size_t i = 0;
  for (const auto& [frame, dets] : stage1) {
    auto& out = result.filtered[frame];
    for (const auto& d : dets) {
      if (verdicts[i].kept) {
        out.push_back(d);
        ++result.kept;
      } else {
        ++result.removed;
      }
      ++i;
    }
  }
  result.verdicts = std::move(verdicts);
  return result;
}

std::vector<WindowSweepRow> sweep_window(const FrameDetections& stage1, const Tracker& tracker,
                                         std::span<const int> w_values, double match_iou,
                                         ExecutionPolicy policy) {
  for (int w : w_values) check_params(w, match_iou);
  std::vector<WindowSweepRow> rows;
  for (int w : w_values) {
    const auto r = temporal_filter(stage1, tracker, w, match_iou, policy);
    rows.push_back({w, r.kept, r.removed});
  }
  return rows;
}

}  // namespace vidcount
