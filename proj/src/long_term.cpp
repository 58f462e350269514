#include "vidcount/long_term.hpp"

#include <algorithm>
#include <numeric>

#include "vidcount/errors.hpp"

namespace vidcount {

LongTermCounter::LongTermCounter(const Tracker& tracker, double new_object_iou,
                                 ExecutionPolicy policy)
    : tracker_(&tracker), new_object_iou_(new_object_iou), policy_(policy) {
  if (!(new_object_iou >= 0.0 && new_object_iou <= 1.0)) {
    throw ConfigError("new_object_iou", "must be in [0, 1]");
  }
}

namespace {

struct Step {
  Propagation propagation;
  bool failed = false;
};

Step propagate_one(const Tracker& tracker, const Masklet& m, int frame) {
  Step s;
  try {
    const auto& birth = m.per_frame.at(m.birth_frame).mask;
    const int target[] = {frame};
    auto props = tracker.propagate(m.birth_frame, birth, target);
    if (props.size() != 1) throw ContractError("tracker returned the wrong number of results");
    if (!props[0].mask.same_grid(birth)) throw ShapeError("tracker mask on a different grid");
    s.propagation = std::move(props[0]);
    if (!s.propagation.present) s.propagation.mask = BinaryMask(birth.height(), birth.width());
  } catch (const std::exception&) {
    const auto& birth = m.per_frame.at(m.birth_frame).mask;
    s.propagation = {BinaryMask(birth.height(), birth.width()), false};
    s.failed = true;
  }
  return s;
}

}  // namespace

void LongTermCounter::ingest(int frame, const std::vector<Detection>& detections) {
  if (frame <= last_frame_) {
    throw ContractError("frames must be ingested in increasing order (got " +
                        std::to_string(frame) + " after " + std::to_string(last_frame_) + ")");
  }
  last_frame_ = frame;

  // Propagate existing masklets to this frame; objects are independent.
  std::vector<Step> steps(masklets_.size());
  const auto n = static_cast<std::ptrdiff_t>(masklets_.size());
  if (!policy_.parallel()) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      steps[std::size_t(i)] = propagate_one(*tracker_, masklets_[std::size_t(i)], frame);
    }
  } else {
#pragma omp parallel for schedule(dynamic, 4) num_threads(policy_.threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      steps[std::size_t(i)] = propagate_one(*tracker_, masklets_[std::size_t(i)], frame);
    }
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].failed) ++report_.tracker_errors;
    masklets_[i].per_frame.emplace(
        frame, MaskletFrame{std::move(steps[i].propagation.mask), steps[i].propagation.present});
  }

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });

  for (std::size_t idx : order) {
    const Detection& d = detections[idx];
    if (!d.mask || d.mask->empty()) throw ContractError("detection '" + d.id + "' has no mask");
    double best = 0.0;
    int best_id = -1;
    for (const auto& m : masklets_) {
      const auto& mf = m.per_frame.at(frame);
      if (!mf.present) continue;
      const double iou = mask_iou(mf.mask, *d.mask);
      if (best_id < 0 || iou > best) {
        best = iou;
        best_id = m.masklet_id;
      }
    }

    Association a{d.id, frame, best_id, false, best};
    if (best_id < 0 || best <= new_object_iou_) {
      Masklet m;
      m.masklet_id = static_cast<int>(masklets_.size());
      m.birth_frame = frame;
      m.label = d.label;
      m.per_frame.emplace(frame, MaskletFrame{*d.mask, true});
      a.masklet_id = m.masklet_id;
      a.spawned = true;
      report_.births.push_back({m.masklet_id, frame});
      masklets_.push_back(std::move(m));
      report_.global_count = static_cast<int>(masklets_.size());
    }
    associations_.push_back(std::move(a));
  }

  int visible = 0;
  for (const auto& m : masklets_) {
    const auto& mf = m.per_frame.at(frame);
    if (mf.present && !mf.mask.empty()) ++visible;
  }
  report_.per_frame_visible[frame] = visible;
}

LongTermResult LongTermCounter::finish() && {
  return {std::move(report_), std::move(masklets_), std::move(associations_)};
}

LongTermResult associate_and_count(const FrameDetections& filtered, const Tracker& tracker,
                                   double new_object_iou, ExecutionPolicy policy) {
  LongTermCounter counter(tracker, new_object_iou, policy);
  for (const auto& [frame, dets] : filtered) counter.ingest(frame, dets);
  return std::move(counter).finish();
}

CausalCounter::CausalCounter(CausalMode mode, const Tracker& tracker, CausalParams params,
                             ExecutionPolicy policy)
    : mode_(mode),
      tracker_(&tracker),
      params_(params),
      counter_(tracker, params.new_object_iou, policy) {
  if (mode == CausalMode::offline) throw ContractError("causal counting needs lagged or immediate mode");
  if (params.w < 1) throw ConfigError("filter_window_w", "must be >= 1");
  if (!(params.match_iou >= 0.0 && params.match_iou <= 1.0)) {
    throw ConfigError("match_iou", "must be in [0, 1]");
  }
}

CausalSample CausalCounter::process(std::size_t position, int emitted_at) {
  const int frame = frames_[position];
  const auto& dets = history_.at(frame);
  if (mode_ == CausalMode::immediate) {
    counter_.ingest(frame, dets);
  } else {
    // Only frames seen so far are visible to the filter.
    std::vector<Detection> kept;
    for (const auto& d : dets) {
      const auto v = filter_detection(history_, frames_, position, d, *tracker_, params_.w,
                                      params_.match_iou);
      if (v.kept) kept.push_back(d);
    }
    counter_.ingest(frame, kept);
  }
  return {frame, emitted_at, counter_.global_count()};
}

std::vector<CausalSample> CausalCounter::push(int frame, std::vector<Detection> detections) {
  if (!frames_.empty() && frame <= frames_.back()) {
    throw ContractError("frames must be pushed in increasing order");
  }
  frames_.push_back(frame);
  history_.emplace(frame, std::move(detections));

  std::vector<CausalSample> out;
  const std::size_t latest = frames_.size() - 1;
  const std::size_t lag = mode_ == CausalMode::immediate ? 0 : std::size_t(params_.w);
  while (next_position_ + lag <= latest) {
    out.push_back(process(next_position_, frame));
    ++next_position_;
  }
  return out;
}

std::vector<CausalSample> CausalCounter::finish() {
  std::vector<CausalSample> out;
  while (next_position_ < frames_.size()) {
    out.push_back(process(next_position_, frames_.back()));
    ++next_position_;
  }
  return out;
}

std::vector<CausalSample> causal_count(CausalMode mode, const FrameDetections& stage1,
                                       const Tracker& tracker, CausalParams params,
                                       ExecutionPolicy policy) {
  CausalCounter causal(mode, tracker, params, policy);
  std::vector<CausalSample> stream;
  for (const auto& [frame, dets] : stage1) {
    auto out = causal.push(frame, dets);
    stream.insert(stream.end(), out.begin(), out.end());
  }
  auto tail = causal.finish();
  stream.insert(stream.end(), tail.begin(), tail.end());
  return stream;
}

}  // namespace vidcount
