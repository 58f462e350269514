#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vidcount/frame_detection.hpp"
#include "vidcount/interchange.hpp"
#include "vidcount/temporal_filter.hpp"

namespace vidcount {

enum class ObjectShape { rect, ellipse };

struct SceneConfig {
  int height = 128;
  int width = 128;
  int n_frames = 30;
  int n_objects = 5;
  ObjectShape shape = ObjectShape::rect;
  double size_min = 8.0;  // side length range, pixels
  double size_max = 16.0;
  double speed_min = 0.0;  // pixels per frame
  double speed_max = 2.0;
  // Entry frame is drawn from [entry_first, entry_last]; exit frame from
  // [max(entry, exit_first), exit_last]. -1 means the last frame.
  int entry_first = 0;
  int entry_last = 0;
  int exit_first = -1;
  int exit_last = -1;
  // Re-entry: the object vanishes for [absence_min, absence_max] frames
  // somewhere inside its lifetime and comes back under the same track id.
  bool allow_reentry = false;
  double reentry_prob = 0.5;
  int absence_min = 2;
  int absence_max = 6;
  // Objects whose longest run of visible frames is shorter than this are
  // removed from the scene (and the scene re-rendered without them).
  int min_visible_run = 1;
  double fps = 3.0;
  std::vector<std::string> categories{"object"};
  std::uint64_t seed = 0;

  // Throws ConfigError, e.g. when objects cannot fit on the grid.
  void validate() const;
};

struct ScenePack {
  SceneConfig config;
  std::vector<GroundTruthTrack> tracks;  // sorted by track_id; id order is z-order
  std::vector<std::vector<int>> visible_by_frame;  // track indices per frame

  int visible_count(int frame) const;
  int unique_count() const { return static_cast<int>(tracks.size()); }
  int unique_count(const std::string& category) const;

  // Rebuilds the derived per-frame index from tracks.
  void index();
};

// Linear motion with reflection at the borders, entry/exit windows, optional
// re-entry, and occlusion by z-order (lower track id in front). Pure function
// of the config.
ScenePack generate_scene(const SceneConfig& config);

// Builds a ScenePack around tracks read from a file. Grid size comes from the
// masks; frame count is one past the last annotated frame unless given.
ScenePack scene_from_tracks(std::vector<GroundTruthTrack> tracks, int n_frames = 0,
                            double fps = 3.0);

struct NoiseConfig {
  double p_miss = 0.0;
  double fp_rate = 0.0;            // Poisson mean of new false positives per frame
  std::vector<int> fp_lifetimes{1};  // each false positive draws one uniformly
  double jitter_sigma = 0.0;       // pixels
  double id_switch_prob = 0.0;     // per tracked anchor
  std::uint64_t seed = 0;

  void validate() const;
};

/// A false positive that persists for a few frames at a fixed place.
struct Phantom {
  std::string id;
  std::string label;
  int first_frame = 0;
  int last_frame = 0;
  double score = 0.0;
  BinaryMask mask;
};

struct SimDetection {
  Detection detection;
  int track = -1;    // index into ScenePack::tracks, -1 for false positives
  int phantom = -1;  // index into NoisyDetections::phantoms
};

struct NoisyDetections {
  std::map<int, std::vector<SimDetection>> per_frame;
  std::vector<Phantom> phantoms;
  std::size_t true_detections = 0;
  std::size_t false_detections = 0;  // one per phantom per frame it is shown
};

// Noisy detector output for every frame of the scene. True objects are kept
// with probability 1 - p_miss, shifted by rounded N(0, jitter_sigma) pixel
// offsets, scored in [0.6, 1). False positives are random rectangles sized
// like real objects, scored in [0.23, 0.6).
NoisyDetections synth_detect(const ScenePack& scene, const NoiseConfig& noise);

/// In-process detector and segmenter backed by simulated detections.
class SyntheticDetector final : public Detector, public Segmenter {
 public:
  SyntheticDetector(std::shared_ptr<const ScenePack> scene,
                    std::shared_ptr<const NoisyDetections> detections);

  std::vector<Candidate> detect(int frame, const Prompt& prompt) const override;
  BinaryMask segment(int frame, const BoundingBox& box) const override;

  // Category a prompt refers to: its text, else the category of the object
  // best covered by the first exemplar. nullopt means "everything".
  std::optional<std::string> resolve_category(const Prompt& prompt) const;

 private:
  std::shared_ptr<const ScenePack> scene_;
  std::shared_ptr<const NoisyDetections> detections_;
};

/// Ground-truth tracker.
///
/// The anchor mask is assigned to the ground-truth track (or, failing that,
/// the simulated false positive) it overlaps most on the anchor frame; ties go
/// to the lowest track id. The returned masks are that object's true masks.
/// An anchor overlapping nothing is absent on every target. With
/// id_switch_prob > 0 the tracker may jump to the nearest other track from a
/// seed-determined frame distance onwards.
class OracleTracker final : public Tracker {
 public:
  OracleTracker(std::shared_ptr<const ScenePack> scene,
                std::shared_ptr<const NoisyDetections> detections = nullptr,
                NoiseConfig noise = {});

  std::vector<Propagation> propagate(int anchor_frame, const BinaryMask& anchor_mask,
                                     std::span<const int> targets) const override;

  struct Identity {
    int track = -1;
    int phantom = -1;
  };
  Identity identify(int anchor_frame, const BinaryMask& anchor_mask) const;

  // Frame distance from the anchor at which a track anchored on anchor_frame
  // switches identity, and the track it switches to. nullopt: no switch.
  std::optional<std::pair<int, int>> identity_switch(int track, int anchor_frame) const;

 private:
  std::shared_ptr<const ScenePack> scene_;
  std::shared_ptr<const NoisyDetections> detections_;
  NoiseConfig noise_;
};

}  // namespace vidcount
