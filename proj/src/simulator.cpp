#include "vidcount/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "vidcount/errors.hpp"
#include "vidcount/prng.hpp"

namespace vidcount {

namespace {

// Stream tags so scene layout, detector noise and tracker noise never share draws.
constexpr std::uint64_t kSceneStream = 0x5CE4E;
constexpr std::uint64_t kDetectStream = 0xDE7EC7;
constexpr std::uint64_t kSwitchStream = 0x5A17C4;

std::string track_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "t%04d", index);
  return buf;
}

struct SceneObject {
  int index = 0;
  double w = 0, h = 0;
  std::vector<double> xs, ys;  // top-left corner per frame
  int entry = 0, exit = 0;
  int gap_first = -1, gap_last = -1;
  std::string category;

  bool present(int f) const {
    return f >= entry && f <= exit && !(f >= gap_first && f <= gap_last);
  }
};

template <typename Fn>
void for_each_span(const BinaryMask& mask, Fn&& fn) {
  std::uint64_t pos = 0;
  const auto& runs = mask.runs();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i % 2 == 1) fn(pos, pos + runs[i]);
    pos += runs[i];
  }
}

std::pair<double, double> centroid(const BinaryMask& mask) {
  const std::uint64_t w = std::uint64_t(mask.width());
  double sr = 0, sc = 0, n = 0;
  for_each_span(mask, [&](std::uint64_t b, std::uint64_t e) {
    for (std::uint64_t p = b; p < e; ++p) {
      sr += double(p / w);
      sc += double(p % w);
      n += 1;
    }
  });
  if (n == 0) return {0, 0};
  return {sr / n, sc / n};
}

int resolve_last(int v, int n_frames) { return v < 0 ? n_frames - 1 : v; }

std::vector<GroundTruthTrack> render(const SceneConfig& cfg, const std::vector<SceneObject>& objs,
                                     const std::vector<char>& alive) {
  const int H = cfg.height, W = cfg.width;
  std::vector<GroundTruthTrack> tracks(objs.size());
  for (std::size_t i = 0; i < objs.size(); ++i) {
    tracks[i].track_id = track_name(objs[i].index);
    tracks[i].category = objs[i].category;
  }
  std::vector<int> zbuf(std::size_t(H) * std::size_t(W));
  std::vector<BinaryMask> rasters(objs.size());
  for (int f = 0; f < cfg.n_frames; ++f) {
    std::fill(zbuf.begin(), zbuf.end(), -1);
    // Painter from the front: lower index claims pixels first.
    for (std::size_t i = 0; i < objs.size(); ++i) {
      if (!alive[i] || !objs[i].present(f)) continue;
      const BoundingBox box{objs[i].xs[std::size_t(f)], objs[i].ys[std::size_t(f)], objs[i].w,
                            objs[i].h};
      rasters[i] = cfg.shape == ObjectShape::rect ? rasterize_box(H, W, box)
                                                  : rasterize_ellipse(H, W, box);
      for_each_span(rasters[i], [&](std::uint64_t b, std::uint64_t e) {
        for (std::uint64_t p = b; p < e; ++p) {
          if (zbuf[p] < 0) zbuf[p] = int(i);
        }
      });
    }
    for (std::size_t i = 0; i < objs.size(); ++i) {
      if (!alive[i] || !objs[i].present(f)) continue;
      MaskBuilder builder(H, W);
      for_each_span(rasters[i], [&](std::uint64_t b, std::uint64_t e) {
        for (std::uint64_t p = b; p < e; ++p) {
          if (zbuf[p] == int(i)) builder.add_span(p, 1);
        }
      });
      BinaryMask visible = std::move(builder).finish();
      if (!visible.empty()) tracks[i].per_frame.emplace(f, std::move(visible));
    }
  }
  return tracks;
}

int longest_run(const GroundTruthTrack& t) {
  int best = 0, run = 0, prev = -2;
  for (const auto& [f, m] : t.per_frame) {
    run = (f == prev + 1) ? run + 1 : 1;
    best = std::max(best, run);
    prev = f;
  }
  return best;
}

}  // namespace

void SceneConfig::validate() const {
  if (height < 1 || width < 1) throw ConfigError("grid", "height and width must be >= 1");
  if (n_frames < 1) throw ConfigError("n_frames", "must be >= 1");
  if (n_objects < 0) throw ConfigError("n_objects", "must be >= 0");
  if (!(size_min > 0 && size_min <= size_max)) throw ConfigError("size", "need 0 < size_min <= size_max");
  if (size_max > std::min(height, width)) throw ConfigError("size_max", "object larger than the grid");
  if (!(speed_min >= 0 && speed_min <= speed_max)) {
    throw ConfigError("speed", "need 0 <= speed_min <= speed_max");
  }
  if (entry_first < 0 || entry_first > entry_last || entry_last >= n_frames) {
    throw ConfigError("entry", "entry window must lie inside the video");
  }
  const int ef = resolve_last(exit_first, n_frames), el = resolve_last(exit_last, n_frames);
  if (ef > el || el >= n_frames || el < entry_last) {
    throw ConfigError("exit", "exit window must lie inside the video and after the entry window");
  }
  if (!(reentry_prob >= 0 && reentry_prob <= 1)) throw ConfigError("reentry_prob", "must be in [0, 1]");
  if (absence_min < 1 || absence_min > absence_max) {
    throw ConfigError("absence", "need 1 <= absence_min <= absence_max");
  }
  if (min_visible_run < 1) throw ConfigError("min_visible_run", "must be >= 1");
  if (!(std::isfinite(fps) && fps > 0)) throw ConfigError("fps", "must be > 0");
  if (categories.empty()) throw ConfigError("categories", "need at least one category");
}

void ScenePack::index() {
  visible_by_frame.assign(std::size_t(std::max(config.n_frames, 0)), {});
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (const auto& [f, m] : tracks[i].per_frame) {
      if (f >= 0 && f < config.n_frames && !m.empty()) {
        visible_by_frame[std::size_t(f)].push_back(int(i));
      }
    }
  }
}

int ScenePack::visible_count(int frame) const {
  if (frame < 0 || frame >= int(visible_by_frame.size())) return 0;
  return int(visible_by_frame[std::size_t(frame)].size());
}

int ScenePack::unique_count(const std::string& category) const {
  return int(std::count_if(tracks.begin(), tracks.end(),
                           [&](const GroundTruthTrack& t) { return t.category == category; }));
}

ScenePack generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(derive_seed(cfg.seed, kSceneStream));
  const int exit_first = resolve_last(cfg.exit_first, cfg.n_frames);
  const int exit_last = resolve_last(cfg.exit_last, cfg.n_frames);

  std::vector<SceneObject> objs(std::size_t(cfg.n_objects));
  for (int i = 0; i < cfg.n_objects; ++i) {
    auto& o = objs[std::size_t(i)];
    o.index = i;
    o.w = rng.uniform(cfg.size_min, cfg.size_max);
    o.h = rng.uniform(cfg.size_min, cfg.size_max);
    double x = rng.uniform(0.0, cfg.width - o.w);
    double y = rng.uniform(0.0, cfg.height - o.h);
    const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
    const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
    double vx = speed * std::cos(angle), vy = speed * std::sin(angle);
    o.entry = int(rng.uniform_int(cfg.entry_first, cfg.entry_last));
    o.exit = int(rng.uniform_int(std::max(o.entry, exit_first), exit_last));
    o.category = cfg.categories[std::size_t(rng.uniform_int(0, std::int64_t(cfg.categories.size()) - 1))];
    if (cfg.allow_reentry && rng.bernoulli(cfg.reentry_prob) && o.exit - o.entry >= 2) {
      o.gap_first = int(rng.uniform_int(o.entry + 1, o.exit - 1));
      const int len = int(rng.uniform_int(cfg.absence_min, cfg.absence_max));
      o.gap_last = std::min(o.gap_first + len - 1, o.exit - 1);
    }

    // Linear motion, reflecting off the borders.
    const double max_x = cfg.width - o.w, max_y = cfg.height - o.h;
    auto reflect = [](double& p, double& v, double hi) {
      for (int guard = 0; guard < 4 && (p < 0 || p > hi); ++guard) {
        if (p < 0) {
          p = -p;
          v = -v;
        } else if (p > hi) {
          p = 2 * hi - p;
          v = -v;
        }
      }
      p = std::clamp(p, 0.0, hi);
    };
    for (int f = 0; f < cfg.n_frames; ++f) {
      o.xs.push_back(x);
      o.ys.push_back(y);
      x += vx;
      y += vy;
      reflect(x, vx, max_x);
      reflect(y, vy, max_y);
    }
  }

  std::vector<char> alive(objs.size(), 1);
  std::vector<GroundTruthTrack> tracks;
  while (true) {
    tracks = render(cfg, objs, alive);
    bool removed = false;
    for (std::size_t i = 0; i < objs.size(); ++i) {
      if (alive[i] && longest_run(tracks[i]) < cfg.min_visible_run) {
        alive[i] = 0;
        removed = true;
      }
    }
    if (!removed) break;
  }

  ScenePack pack;
  pack.config = cfg;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (alive[i]) pack.tracks.push_back(std::move(tracks[i]));
  }
  pack.index();
  return pack;
}

ScenePack scene_from_tracks(std::vector<GroundTruthTrack> tracks, int n_frames, double fps) {
  ScenePack pack;
  int last = -1;
  bool have_grid = false;
  for (const auto& t : tracks) {
    for (const auto& [f, m] : t.per_frame) {
      if (!have_grid) {
        pack.config.height = m.height();
        pack.config.width = m.width();
        have_grid = true;
      }
      if (m.height() != pack.config.height || m.width() != pack.config.width) {
        throw ShapeError("track '" + t.track_id + "' is on a different grid");
      }
      last = std::max(last, f);
    }
  }
  std::sort(tracks.begin(), tracks.end(),
            [](const auto& a, const auto& b) { return a.track_id < b.track_id; });
  pack.config.n_frames = std::max(n_frames, last + 1);
  pack.config.n_objects = int(tracks.size());
  pack.config.fps = fps;
  std::vector<std::string> cats;
  for (const auto& t : tracks) cats.push_back(t.category);
  std::sort(cats.begin(), cats.end());
  cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
  if (!cats.empty()) pack.config.categories = std::move(cats);
  pack.tracks = std::move(tracks);
  pack.index();
  return pack;
}

void NoiseConfig::validate() const {
  auto prob = [](const char* key, double v) {
    if (!(v >= 0 && v <= 1)) throw ConfigError(key, "must be in [0, 1]");
  };
  prob("p_miss", p_miss);
  prob("id_switch_prob", id_switch_prob);
  if (!(fp_rate >= 0 && std::isfinite(fp_rate))) throw ConfigError("fp_rate", "must be >= 0");
  if (!(jitter_sigma >= 0 && std::isfinite(jitter_sigma))) {
    throw ConfigError("jitter_sigma", "must be >= 0");
  }
  if (fp_lifetimes.empty()) throw ConfigError("fp_lifetime", "need at least one lifetime");
  for (int l : fp_lifetimes) {
    if (l < 1) throw ConfigError("fp_lifetime", "must be >= 1");
  }
}

NoisyDetections synth_detect(const ScenePack& scene, const NoiseConfig& noise) {
  noise.validate();
  const auto& cfg = scene.config;
  SplitMix64 rng(derive_seed(noise.seed, kDetectStream));
  NoisyDetections out;
  std::vector<int> active;  // phantom indices still on screen

  const int fp_w_max = std::max(1, std::min<int>(int(std::lround(cfg.size_max)), cfg.width));
  const int fp_h_max = std::max(1, std::min<int>(int(std::lround(cfg.size_max)), cfg.height));
  const int fp_min = std::max(1, int(std::lround(cfg.size_min)));

  for (int f = 0; f < cfg.n_frames; ++f) {
    auto& dets = out.per_frame[f];
    for (int ti : scene.visible_by_frame[std::size_t(f)]) {
      const auto& track = scene.tracks[std::size_t(ti)];
      const BinaryMask& truth = track.per_frame.at(f);
      const bool miss = rng.bernoulli(noise.p_miss);
      int dx = 0, dy = 0;
      if (noise.jitter_sigma > 0) {
        dx = int(std::lround(rng.normal(0.0, noise.jitter_sigma)));
        dy = int(std::lround(rng.normal(0.0, noise.jitter_sigma)));
      }
      const double score = rng.uniform(0.6, 1.0);
      if (miss) continue;
      BinaryMask mask = (dx || dy) ? shift_mask(truth, dx, dy) : truth;
      if (mask.empty()) continue;
      SimDetection sd;
      sd.detection.frame = f;
      sd.detection.box = *mask.bounds();
      sd.detection.score = score;
      sd.detection.label = track.category;
      sd.detection.mask = std::move(mask);
      sd.detection.id = track.track_id + "@" + std::to_string(f);
      sd.track = ti;
      dets.push_back(std::move(sd));
      ++out.true_detections;
    }

    const std::uint32_t spawned = rng.poisson(noise.fp_rate);
    for (std::uint32_t k = 0; k < spawned; ++k) {
      const int w = int(rng.uniform_int(std::min(fp_min, fp_w_max), fp_w_max));
      const int h = int(rng.uniform_int(std::min(fp_min, fp_h_max), fp_h_max));
      const int x = int(rng.uniform_int(0, cfg.width - w));
      const int y = int(rng.uniform_int(0, cfg.height - h));
      const int life = noise.fp_lifetimes[std::size_t(
          rng.uniform_int(0, std::int64_t(noise.fp_lifetimes.size()) - 1))];
      const double score = rng.uniform(0.23, 0.6);
      const auto& label = cfg.categories[std::size_t(
          rng.uniform_int(0, std::int64_t(cfg.categories.size()) - 1))];
      Phantom p;
      p.id = "fp" + std::to_string(out.phantoms.size());
      p.label = label;
      p.first_frame = f;
      p.last_frame = std::min(f + life - 1, cfg.n_frames - 1);
      p.score = score;
      p.mask = rasterize_box(cfg.height, cfg.width, {double(x), double(y), double(w), double(h)});
      active.push_back(int(out.phantoms.size()));
      out.phantoms.push_back(std::move(p));
    }

    std::vector<int> still;
    for (int pi : active) {
      const auto& p = out.phantoms[std::size_t(pi)];
      if (p.last_frame < f) continue;
      SimDetection sd;
      sd.detection.frame = f;
      sd.detection.box = *p.mask.bounds();
      sd.detection.score = p.score;
      sd.detection.label = p.label;
      sd.detection.mask = p.mask;
      sd.detection.id = p.id + "@" + std::to_string(f);
      sd.phantom = pi;
      dets.push_back(std::move(sd));
      ++out.false_detections;
      still.push_back(pi);
    }
    active = std::move(still);
  }
  return out;
}

SyntheticDetector::SyntheticDetector(std::shared_ptr<const ScenePack> scene,
                                     std::shared_ptr<const NoisyDetections> detections)
    : scene_(std::move(scene)), detections_(std::move(detections)) {
  if (!scene_ || !detections_) throw ContractError("SyntheticDetector needs a scene and detections");
}

std::optional<std::string> SyntheticDetector::resolve_category(const Prompt& prompt) const {
  if (prompt.text && !prompt.text->empty()) return prompt.text;
  if (prompt.exemplars.empty()) return std::nullopt;
  const auto& ex = prompt.exemplars.front();
  if (ex.frame < 0 || ex.frame >= int(scene_->visible_by_frame.size())) return std::nullopt;
  double best = 0.0;
  std::optional<std::string> category;
  for (int ti : scene_->visible_by_frame[std::size_t(ex.frame)]) {
    const auto& t = scene_->tracks[std::size_t(ti)];
    const auto bounds = t.per_frame.at(ex.frame).bounds();
    if (!bounds || (bounds->area() <= 0 && ex.box.area() <= 0)) continue;
    const double iou = box_iou(*bounds, ex.box);
    if (iou > best) {
      best = iou;
      category = t.category;
    }
  }
  return category;
}

std::vector<Candidate> SyntheticDetector::detect(int frame, const Prompt& prompt) const {
  std::vector<Candidate> out;
  auto it = detections_->per_frame.find(frame);
  if (it == detections_->per_frame.end()) return out;
  const auto category = resolve_category(prompt);
  for (const auto& sd : it->second) {
    const auto& d = sd.detection;
    if (category && d.label != *category) continue;
    out.push_back({d.box, d.score, d.label, d.id});
  }
  return out;
}

BinaryMask SyntheticDetector::segment(int frame, const BoundingBox& box) const {
  if (auto it = detections_->per_frame.find(frame); it != detections_->per_frame.end()) {
    for (const auto& sd : it->second) {
      if (sd.detection.box == box) return *sd.detection.mask;
    }
  }
  return rasterize_box(scene_->config.height, scene_->config.width, box);
}

OracleTracker::OracleTracker(std::shared_ptr<const ScenePack> scene,
                             std::shared_ptr<const NoisyDetections> detections, NoiseConfig noise)
    : scene_(std::move(scene)), detections_(std::move(detections)), noise_(std::move(noise)) {
  if (!scene_) throw ContractError("OracleTracker needs a scene");
  noise_.validate();
}

OracleTracker::Identity OracleTracker::identify(int anchor_frame,
                                                const BinaryMask& anchor_mask) const {
  Identity id;
  // An anchor overlapping a track by half or less is not that object; this
  // keeps unannotated false positives that clip a real one unidentified.
  double best = 0.5;
  if (anchor_frame >= 0 && anchor_frame < int(scene_->visible_by_frame.size())) {
    for (int ti : scene_->visible_by_frame[std::size_t(anchor_frame)]) {
      const double iou = mask_iou(scene_->tracks[std::size_t(ti)].per_frame.at(anchor_frame), anchor_mask);
      if (iou > best) {
        best = iou;
        id.track = ti;
      }
    }
  }
  if (detections_) {
    for (std::size_t pi = 0; pi < detections_->phantoms.size(); ++pi) {
      const auto& p = detections_->phantoms[pi];
      if (anchor_frame < p.first_frame || anchor_frame > p.last_frame) continue;
      const double iou = mask_iou(p.mask, anchor_mask);
      if (iou > best) {
        best = iou;
        id.track = -1;
        id.phantom = int(pi);
      }
    }
  }
  return id;
}

std::optional<std::pair<int, int>> OracleTracker::identity_switch(int track, int anchor_frame) const {
  if (noise_.id_switch_prob <= 0.0) return std::nullopt;
  const std::uint64_t key = (std::uint64_t(std::uint32_t(track)) << 32) | std::uint32_t(anchor_frame);
  SplitMix64 rng(derive_seed(derive_seed(noise_.seed, kSwitchStream), key));
  if (!rng.bernoulli(noise_.id_switch_prob)) return std::nullopt;
  const int distance = int(rng.uniform_int(1, std::max(1, scene_->config.n_frames - 1)));

  if (anchor_frame < 0 || anchor_frame >= int(scene_->visible_by_frame.size())) return std::nullopt;
  const auto& here = scene_->tracks[std::size_t(track)].per_frame;
  auto self = here.find(anchor_frame);
  if (self == here.end()) return std::nullopt;
  const auto [sr, sc] = centroid(self->second);
  int nearest = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int ti : scene_->visible_by_frame[std::size_t(anchor_frame)]) {
    if (ti == track) continue;
    const auto [r, c] = centroid(scene_->tracks[std::size_t(ti)].per_frame.at(anchor_frame));
    const double d2 = (r - sr) * (r - sr) + (c - sc) * (c - sc);
    if (d2 < best) {
      best = d2;
      nearest = ti;
    }
  }
  if (nearest < 0) return std::nullopt;
  return std::pair{distance, nearest};
}

std::vector<Propagation> OracleTracker::propagate(int anchor_frame, const BinaryMask& anchor_mask,
                                                  std::span<const int> targets) const {
  const int H = scene_->config.height, W = scene_->config.width;
  if (anchor_mask.height() != H || anchor_mask.width() != W) {
    throw ShapeError("oracle tracker: anchor mask is not on the scene grid");
  }
  if (anchor_mask.empty()) throw ContractError("oracle tracker: empty anchor mask");
  const Identity id = identify(anchor_frame, anchor_mask);
  const auto sw = id.track >= 0 ? identity_switch(id.track, anchor_frame) : std::nullopt;

  std::vector<Propagation> out;
  out.reserve(targets.size());
  for (int t : targets) {
    Propagation p{BinaryMask(H, W), false};
    if (id.track >= 0) {
      int track = id.track;
      if (sw && std::abs(t - anchor_frame) >= sw->first) track = sw->second;
      const auto& frames = scene_->tracks[std::size_t(track)].per_frame;
      if (auto it = frames.find(t); it != frames.end() && !it->second.empty()) {
        p = {it->second, true};
      }
    } else if (id.phantom >= 0) {
      const auto& ph = detections_->phantoms[std::size_t(id.phantom)];
      if (t >= ph.first_frame && t <= ph.last_frame) p = {ph.mask, true};
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace vidcount
