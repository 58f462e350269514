#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vidcount/geometry.hpp"

namespace vidcount {

/// One frame-level candidate object.
struct Detection {
  int frame = 0;
  BoundingBox box;
  double score = 0.0;
  std::string label;
  std::optional<BinaryMask> mask;
  std::string id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Exemplar {
  int frame = 0;
  BoundingBox box;

  friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

/// Category prompt: free text, visual exemplars, or both.
struct Prompt {
  std::optional<std::string> text;
  std::vector<Exemplar> exemplars;

  // Throws ContractError when neither text nor exemplars is given, or when an
  // exemplar frame lies outside [0, total_frames).
  void validate(int total_frames) const;
};

struct GroundTruthTrack {
  std::string track_id;
  std::string category;
  std::map<int, BinaryMask> per_frame;  // absent frame: not visible

  friend bool operator==(const GroundTruthTrack&, const GroundTruthTrack&) = default;
};

enum class CausalMode { offline, lagged, immediate };

std::string_view to_string(CausalMode mode);
std::optional<CausalMode> parse_causal_mode(std::string_view text);

struct RunConfig {
  double target_fps = 3.0;
  int filter_window_w = 3;
  double match_iou = 0.5;
  double new_object_iou = 0.5;
  double score_threshold = 0.23;
  CausalMode causal_mode = CausalMode::offline;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the first offending key.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct MaskletFrame {
  BinaryMask mask;
  bool present = false;

  friend bool operator==(const MaskletFrame&, const MaskletFrame&) = default;
};

/// An object mask propagated over time under one identity.
struct Masklet {
  int masklet_id = 0;
  int birth_frame = 0;
  std::string label;
  std::map<int, MaskletFrame> per_frame;

  friend bool operator==(const Masklet&, const Masklet&) = default;
};

struct Birth {
  int masklet_id = 0;
  int frame = 0;

  friend bool operator==(const Birth&, const Birth&) = default;
};

struct CountReport {
  std::map<int, int> per_frame_visible;
  int global_count = 0;
  std::vector<Birth> births;
  std::size_t tracker_errors = 0;

  friend bool operator==(const CountReport&, const CountReport&) = default;
};

/// Predicted count for one (video, category) pair, consumed by evaluation.
struct CountPrediction {
  std::string video_id;
  std::string category;
  std::int64_t count = 0;

  friend bool operator==(const CountPrediction&, const CountPrediction&) = default;
};

template <typename T>
struct Parsed {
  std::vector<T> records;
  std::size_t warnings = 0;  // unknown keys skipped
};

// Detections file:
//   det frame=<int> x=<f> y=<f> w=<f> h=<f> score=<f> label="<s>"
//       [mask=<h>x<w>:<c0,c1,...>] [id=<s>]
// Blank lines and lines starting with '#' are skipped. Records without an id
// get "line<N>". Duplicate ids are a parse error.
Parsed<Detection> parse_detection_stream(std::istream& in);
void write_detections(std::ostream& out, const std::vector<Detection>& detections);
std::string format_detection(const Detection& d);

// Tracks file, one line per visible frame:
//   trk id=<s> category="<s>" frame=<int> mask=<h>x<w>:<c0,c1,...>
// Lines of one track are contiguous; a track id reappearing after another
// track is a duplicate-id error.
Parsed<GroundTruthTrack> parse_track_annotations(std::istream& in);
void write_tracks(std::ostream& out, const std::vector<GroundTruthTrack>& tracks);

// key=value lines, '#' comments, unknown keys rejected, missing keys default.
RunConfig load_run_config(std::istream& in);
void write_run_config(std::ostream& out, const RunConfig& config);

//   pred video="<s>" category="<s>" count=<int>
Parsed<CountPrediction> parse_predictions(std::istream& in);
void write_predictions(std::ostream& out, const std::vector<CountPrediction>& preds);

//   msk id=<int> birth=<int> label="<s>" frame=<int> present=<0|1> mask=<...>
Parsed<Masklet> parse_masklets(std::istream& in);
void write_masklets(std::ostream& out, const std::vector<Masklet>& masklets);

//   report global=<int> tracker_errors=<int>
//   birth masklet=<int> frame=<int>
//   visible frame=<int> count=<int>
void write_count_report(std::ostream& out, const CountReport& report);

// "<h>x<w>:<c0,c1,...>"
std::string format_mask(const BinaryMask& mask);
BinaryMask parse_mask(std::string_view text);

// Shortest text that parses back to the same double.
std::string format_double(double value);

}  // namespace vidcount
