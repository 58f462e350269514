#include "vidcount/pipeline.hpp"

#include "vidcount/errors.hpp"

namespace vidcount {

PipelineResult run_pipeline(const FramePlan& plan, const Prompt& prompt, const Detector& detector,
                            const Segmenter& segmenter, const Tracker& tracker,
                            const RunConfig& config, ExecutionPolicy policy, bool use_filter) {
  config.validate();
  prompt.validate(plan.total_frames);

  PipelineResult result;
  result.plan = plan;
  result.stage1 = run_stage1(plan, prompt, detector, segmenter, config.score_threshold, policy);

  if (config.causal_mode == CausalMode::offline) {
    const FrameDetections* input = &result.stage1.frames;
    if (use_filter) {
      result.filter =
          temporal_filter(result.stage1.frames, tracker, config.filter_window_w, config.match_iou,
                          policy);
      input = &result.filter->filtered;
    }
    result.long_term = associate_and_count(*input, tracker, config.new_object_iou, policy);
    return result;
  }

  CausalCounter causal(config.causal_mode, tracker,
                       {config.filter_window_w, config.match_iou, config.new_object_iou}, policy);
  for (const auto& [frame, dets] : result.stage1.frames) {
    auto out = causal.push(frame, dets);
    result.stream.insert(result.stream.end(), out.begin(), out.end());
  }
  auto tail = causal.finish();
  result.stream.insert(result.stream.end(), tail.begin(), tail.end());
  result.long_term.report = causal.counter().report();
  result.long_term.masklets = causal.counter().masklets();
  return result;
}

std::vector<FpsSweepRow> sweep_fps(int total_frames, double source_fps,
                                   std::span<const double> target_rates, const Prompt& prompt,
                                   const Detector& detector, const Segmenter& segmenter,
                                   const Tracker& tracker, const RunConfig& config,
                                   ExecutionPolicy policy) {
  std::vector<FpsSweepRow> rows;
  for (const double fps : target_rates) {
    const FramePlan plan = plan_frames(total_frames, source_fps, fps);
    RunConfig c = config;
    c.target_fps = fps;
    const auto r = run_pipeline(plan, prompt, detector, segmenter, tracker, c, policy);
    rows.push_back({fps, plan.kept_indices.size(), r.long_term.report.global_count});
  }
  return rows;
}

IouChainTracker::IouChainTracker(FrameDetections detections, double link_iou)
    : detections_(std::move(detections)), link_iou_(link_iou) {
  if (!(link_iou > 0.0 && link_iou <= 1.0)) throw ConfigError("link_iou", "must be in (0, 1]");
}

std::vector<Propagation> IouChainTracker::propagate(int anchor_frame, const BinaryMask& anchor_mask,
                                                    std::span<const int> targets) const {
  std::vector<Propagation> out;
  out.reserve(targets.size());
  const BinaryMask* current = &anchor_mask;
  int cursor = anchor_frame;
  int direction = 0;

  // Best link on one frame, or nullptr.
  const auto link = [&](int frame) -> const BinaryMask* {
    const auto it = detections_.find(frame);
    if (it == detections_.end()) return nullptr;
    const BinaryMask* best = nullptr;
    double best_iou = link_iou_;
    for (const auto& d : it->second) {
      if (!d.mask) continue;
      const double iou = mask_iou(*current, *d.mask);
      if (iou >= best_iou && (best == nullptr || iou > best_iou)) {
        best_iou = iou;
        best = &*d.mask;
      }
    }
    return best;
  };

  for (const int target : targets) {
    if (target == anchor_frame) {
      out.push_back({anchor_mask, true});
      continue;
    }
    const int dir = target > anchor_frame ? 1 : -1;
    if (dir != direction || (target - cursor) * dir < 0) {
      current = &anchor_mask;
      cursor = anchor_frame;
      direction = dir;
    }
    bool linked_at_target = false;
    if (dir > 0) {
      for (auto it = detections_.upper_bound(cursor); it != detections_.end() && it->first <= target;
           ++it) {
        if (const BinaryMask* m = link(it->first)) {
          current = m;
          linked_at_target = it->first == target;
        }
      }
    } else {
      for (auto it = std::make_reverse_iterator(detections_.lower_bound(cursor));
           it != detections_.rend() && it->first >= target; ++it) {
        if (const BinaryMask* m = link(it->first)) {
          current = m;
          linked_at_target = it->first == target;
        }
      }
    }
    cursor = target;
    if (linked_at_target) {
      out.push_back({*current, true});
    } else {
      out.push_back({BinaryMask(anchor_mask.height(), anchor_mask.width()), false});
    }
  }
  return out;
}

}  // namespace vidcount
