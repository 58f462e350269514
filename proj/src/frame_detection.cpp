#include "vidcount/frame_detection.hpp"

#include <cmath>

#include "vidcount/errors.hpp"

namespace vidcount {

FramePlan plan_frames(int total_frames, double source_fps, double target_fps) {
  if (total_frames < 1) throw ConfigError("total_frames", "must be >= 1");
  if (!(std::isfinite(source_fps) && source_fps > 0)) throw ConfigError("source_fps", "must be > 0");
  if (!(std::isfinite(target_fps) && target_fps > 0)) throw ConfigError("target_fps", "must be > 0");

  FramePlan plan{source_fps, target_fps, total_frames, {}};
  if (target_fps >= source_fps) {
    plan.kept_indices.resize(std::size_t(total_frames));
    for (int i = 0; i < total_frames; ++i) plan.kept_indices[std::size_t(i)] = i;
    return plan;
  }
  const double step = source_fps / target_fps;
  const double last = total_frames - 1;
  for (long k = 0; double(k) * step <= last; ++k) {
    const long idx = std::min<long>(std::lround(double(k) * step), total_frames - 1);
    if (plan.kept_indices.empty() || idx > plan.kept_indices.back()) {
      plan.kept_indices.push_back(int(idx));
    }
  }
  return plan;
}

namespace {

struct FrameOutput {
  std::vector<Detection> detections;
  Stage1Diagnostics diagnostics;
};

FrameOutput process_frame(int frame, const Prompt& prompt, const Detector& detector,
                          const Segmenter& segmenter, double threshold) {
  FrameOutput out;
  std::vector<Candidate> candidates;
  try {
    candidates = detector.detect(frame, prompt);
  } catch (const std::exception& e) {
    throw StageError("detector", frame, e.what());
  }
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    auto& c = candidates[k];
    if (!(c.score >= 0.0 && c.score <= 1.0) || !c.box.valid()) {
      throw StageError("detector", frame, "candidate with invalid score or box");
    }
    if (c.score < threshold) {
      ++out.diagnostics.below_threshold;
      continue;
    }
    BinaryMask mask;
    try {
      mask = segmenter.segment(frame, c.box);
    } catch (const std::exception& e) {
      throw StageError("segmenter", frame, e.what());
    }
    if (mask.empty()) {
      ++out.diagnostics.empty_masks;
      continue;
    }
    Detection d;
    d.frame = frame;
    d.box = c.box;
    d.score = c.score;
    d.label = std::move(c.label);
    d.mask = std::move(mask);
    d.id = c.id.empty() ? "f" + std::to_string(frame) + "-" + std::to_string(k) : std::move(c.id);
    out.detections.push_back(std::move(d));
  }
  return out;
}

}  // namespace

Stage1Result run_stage1(const FramePlan& plan, const Prompt& prompt, const Detector& detector,
                        const Segmenter& segmenter, double score_threshold,
                        ExecutionPolicy policy) {
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw ConfigError("score_threshold", "must be in [0, 1]");
  }
  prompt.validate(plan.total_frames);

  const auto& frames = plan.kept_indices;
  const auto n = static_cast<std::ptrdiff_t>(frames.size());
  std::vector<FrameOutput> outputs(frames.size());

  if (!policy.parallel()) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      outputs[std::size_t(i)] = process_frame(frames[std::size_t(i)], prompt, detector, segmenter,
                                              score_threshold);
    }
  } else {
    ErrorSlots errors(frames.size());
#pragma omp parallel for schedule(dynamic) num_threads(policy.threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        outputs[std::size_t(i)] = process_frame(frames[std::size_t(i)], prompt, detector,
                                                segmenter, score_threshold);
      } catch (...) {
        errors.capture(std::size_t(i));
      }
    }
    errors.rethrow_first();
  }

  Stage1Result result;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    result.diagnostics.below_threshold += outputs[i].diagnostics.below_threshold;
    result.diagnostics.empty_masks += outputs[i].diagnostics.empty_masks;
    result.frames.emplace(frames[i], std::move(outputs[i].detections));
  }
  return result;
}

RecordedDetections::RecordedDetections(std::vector<Detection> detections, int height, int width)
    : height_(height), width_(width) {
  for (auto& d : detections) {
    if (d.mask && (d.mask->height() != height || d.mask->width() != width)) {
      throw ShapeError("detection '" + d.id + "' mask is " + std::to_string(d.mask->height()) +
                       "x" + std::to_string(d.mask->width()) + ", video is " +
                       std::to_string(height) + "x" + std::to_string(width));
    }
    by_frame_[d.frame].push_back(std::move(d));
  }
}

std::vector<Candidate> RecordedDetections::detect(int frame, const Prompt& prompt) const {
  std::vector<Candidate> out;
  auto it = by_frame_.find(frame);
  if (it == by_frame_.end()) return out;
  for (const auto& d : it->second) {
    // Recorded files were produced for one prompt; a text prompt still
    // restricts them to its category.
    if (prompt.text && !prompt.text->empty() && d.label != *prompt.text) continue;
    out.push_back({d.box, d.score, d.label, d.id});
  }
  return out;
}

BinaryMask RecordedDetections::segment(int frame, const BoundingBox& box) const {
  if (auto it = by_frame_.find(frame); it != by_frame_.end()) {
    for (const auto& d : it->second) {
      if (d.box == box && d.mask) return *d.mask;
    }
  }
  return rasterize_box(height_, width_, box);
}

int RecordedDetections::frame_count() const {
  return by_frame_.empty() ? 0 : by_frame_.rbegin()->first + 1;
}

}  // namespace vidcount
