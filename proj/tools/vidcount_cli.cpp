// vidcount: batch front end for simulation, counting, filtering, sweeps,
// evaluation and overlay rendering.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vidcount/errors.hpp"
#include "vidcount/metrics.hpp"
#include "vidcount/overlay.hpp"
#include "vidcount/pipeline.hpp"
#include "vidcount/simulator.hpp"

namespace fs = std::filesystem;
using namespace vidcount;

namespace {

// Process exit codes.
enum Exit : int {
  kOk = 0,
  kParse = 3,   // malformed input file
  kConfig = 4,  // bad configuration value
  kStage = 5,   // provider failure inside the pipeline
  kData = 6,    // inconsistent data: grids, contracts, metrics
  kIo = 7,
};

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::parse:
    case ErrorKind::format:
      return kParse;
    case ErrorKind::config:
      return kConfig;
    case ErrorKind::stage:
      return kStage;
    case ErrorKind::io:
      return kIo;
    default:
      return kData;
  }
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

std::vector<Detection> read_detections(const std::string& path) {
  auto in = open_in(path);
  auto parsed = parse_detection_stream(in);
  if (parsed.warnings) {
    std::cerr << "warning: " << parsed.warnings << " unknown key(s) ignored in " << path << '\n';
  }
  return std::move(parsed.records);
}

std::vector<GroundTruthTrack> read_tracks(const std::string& path) {
  auto in = open_in(path);
  auto parsed = parse_track_annotations(in);
  if (parsed.warnings) {
    std::cerr << "warning: " << parsed.warnings << " unknown key(s) ignored in " << path << '\n';
  }
  return std::move(parsed.records);
}

// Options shared by the pipeline commands.
struct RunOptions {
  std::string config;
  std::string detections;
  std::string tracks;
  std::string out;
  std::string mode;
  std::optional<int> window;
  std::optional<double> fps;
  std::optional<std::uint64_t> seed;
  double source_fps = 3.0;
  std::string prompt;
  int height = 0;
  int width = 0;

  void add_to(CLI::App* cmd, bool needs_detections = true) {
    cmd->add_option("--config", config, "Run configuration file");
    auto* d = cmd->add_option("--detections", detections, "Detections file");
    if (needs_detections) d->required();
    cmd->add_option("--tracks", tracks, "Ground-truth tracks; enables the oracle tracker");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--mode", mode, "offline|lagged|immediate");
    cmd->add_option("--window", window, "Temporal filter window w");
    cmd->add_option("--fps", fps, "Target sampling rate");
    cmd->add_option("--seed", seed, "Run seed");
    cmd->add_option("--source-fps", source_fps, "Frame rate of the detections' frame indices");
    cmd->add_option("--prompt", prompt, "Category text; empty keeps every label");
    cmd->add_option("--height", height, "Grid height when no mask fixes it");
    cmd->add_option("--width", width, "Grid width when no mask fixes it");
  }

  RunConfig run_config() const {
    RunConfig c;
    if (!config.empty()) {
      auto in = open_in(config);
      c = load_run_config(in);
    }
    if (!mode.empty()) {
      const auto m = parse_causal_mode(mode);
      if (!m) throw ConfigError("mode", "expected offline, lagged, or immediate");
      c.causal_mode = *m;
    }
    if (window) c.filter_window_w = *window;
    if (fps) c.target_fps = *fps;
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

/// Everything needed to run the pipeline on file inputs.
struct FileInputs {
  std::vector<Detection> detections;
  std::shared_ptr<const ScenePack> scene;  // set with --tracks
  std::unique_ptr<RecordedDetections> recorded;
  std::unique_ptr<Tracker> tracker;
  Prompt prompt;
  int total_frames = 0;
  int height = 0;
  int width = 0;
};

FileInputs load_inputs(const RunOptions& o) {
  FileInputs in;
  in.detections = read_detections(o.detections);
  if (!o.tracks.empty()) in.scene = std::make_shared<const ScenePack>(scene_from_tracks(read_tracks(o.tracks)));

  // Grid: explicit flags, else the first mask, else the tracks.
  in.height = o.height;
  in.width = o.width;
  if (in.height <= 0 || in.width <= 0) {
    for (const auto& d : in.detections) {
      if (d.mask) {
        in.height = d.mask->height();
        in.width = d.mask->width();
        break;
      }
    }
  }
  if ((in.height <= 0 || in.width <= 0) && in.scene) {
    in.height = in.scene->config.height;
    in.width = in.scene->config.width;
  }
  if (in.height <= 0 || in.width <= 0) {
    throw ConfigError("height", "no mask in the inputs; pass --height and --width");
  }

  in.recorded = std::make_unique<RecordedDetections>(in.detections, in.height, in.width);
  in.total_frames = std::max(in.recorded->frame_count(), in.scene ? in.scene->config.n_frames : 0);
  if (in.total_frames == 0) in.total_frames = 1;
  in.prompt.text = o.prompt;
  return in;
}

// Stage 1 output of the recorded detections on every kept frame.
Stage1Result stage1_of(const FileInputs& in, const FramePlan& plan, const RunConfig& c,
                       ExecutionPolicy policy) {
  return run_stage1(plan, in.prompt, *in.recorded, *in.recorded, c.score_threshold, policy);
}

// Oracle tracker over the annotated tracks, else IoU chaining over Stage 1.
void attach_tracker(FileInputs& in, const FrameDetections& stage1) {
  if (in.scene) {
    in.tracker = std::make_unique<OracleTracker>(in.scene);
  } else {
    in.tracker = std::make_unique<IouChainTracker>(stage1);
  }
}

fs::path out_dir(const RunOptions& o) { return o.out.empty() ? fs::path(".") : fs::path(o.out); }

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(piece, &used));
      if (used != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw ConfigError("list", "not an integer: '" + piece + "'");
    }
  }
  if (out.empty()) throw ConfigError("list", "empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(piece, &used));
      if (used != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw ConfigError("list", "not a number: '" + piece + "'");
    }
  }
  if (out.empty()) throw ConfigError("list", "empty list");
  return out;
}

// ---- commands ---------------------------------------------------------------

struct SimulateOptions {
  std::string out;
  std::uint64_t seed = 0;
  int objects = 10;
  int frames = 30;
  int height = 128;
  int width = 128;
  bool reentry = false;
  bool ellipse = false;
  int min_run = 1;
  std::string categories = "object";
  bool emit_detections = false;
  double fp_rate = 0.0;
  std::string fp_lifetimes = "1";
  double p_miss = 0.0;
  double jitter = 0.0;
};

int cmd_simulate(const SimulateOptions& o) {
  SceneConfig cfg;
  cfg.seed = o.seed;
  cfg.n_objects = o.objects;
  cfg.n_frames = o.frames;
  cfg.height = o.height;
  cfg.width = o.width;
  cfg.allow_reentry = o.reentry;
  cfg.shape = o.ellipse ? ObjectShape::ellipse : ObjectShape::rect;
  cfg.min_visible_run = o.min_run;
  cfg.categories.clear();
  std::stringstream ss(o.categories);
  for (std::string c; std::getline(ss, c, ',');) {
    if (!c.empty()) cfg.categories.push_back(c);
  }
  if (o.reentry) {
    cfg.entry_last = cfg.n_frames / 2;
    cfg.exit_first = cfg.n_frames / 2;
  }
  const ScenePack scene = generate_scene(cfg);
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  {
    auto out = open_out(dir / "tracks.txt");
    write_tracks(out, scene.tracks);
  }
  std::cout << "tracks " << scene.unique_count() << " frames " << cfg.n_frames << '\n';
  for (const auto& c : cfg.categories) {
    std::cout << "category \"" << c << "\" count " << scene.unique_count(c) << '\n';
  }
  if (o.emit_detections) {
    NoiseConfig noise;
    noise.seed = o.seed;
    noise.fp_rate = o.fp_rate;
    noise.fp_lifetimes = parse_int_list(o.fp_lifetimes);
    noise.p_miss = o.p_miss;
    noise.jitter_sigma = o.jitter;
    const NoisyDetections d = synth_detect(scene, noise);
    std::vector<Detection> flat;
    for (const auto& [f, list] : d.per_frame) {
      for (const auto& sd : list) flat.push_back(sd.detection);
    }
    auto out = open_out(dir / "detections.txt");
    write_detections(out, flat);
    std::cout << "detections " << d.true_detections << " true " << d.false_detections << " false\n";
  }
  return kOk;
}

int cmd_count(const RunOptions& o) {
  const RunConfig c = o.run_config();
  const auto policy = ExecutionPolicy::from_environment();
  FileInputs in = load_inputs(o);
  const FramePlan plan = plan_frames(in.total_frames, o.source_fps, c.target_fps);
  // Chaining needs the same Stage 1 output the pipeline will see.
  attach_tracker(in, stage1_of(in, plan, c, policy).frames);
  const auto r = run_pipeline(plan, in.prompt, *in.recorded, *in.recorded, *in.tracker, c, policy);

  const fs::path dir = out_dir(o);
  {
    auto out = open_out(dir / "report.txt");
    write_count_report(out, r.long_term.report);
  }
  {
    auto out = open_out(dir / "masklets.txt");
    write_masklets(out, r.long_term.masklets);
  }
  if (!r.stream.empty()) {
    auto out = open_out(dir / "stream.txt");
    for (const auto& s : r.stream) {
      out << "sample frame=" << s.frame << " emitted_at=" << s.emitted_at
          << " count=" << s.global_count << '\n';
    }
  }
  std::cout << "mode " << to_string(c.causal_mode) << " frames " << plan.kept_indices.size()
            << " global_count " << r.long_term.report.global_count << " tracker_errors "
            << r.long_term.report.tracker_errors << '\n';
  if (r.filter) std::cout << "filter kept " << r.filter->kept << " removed " << r.filter->removed << '\n';
  return kOk;
}

int cmd_filter(const RunOptions& o, const std::string& sweep) {
  const RunConfig c = o.run_config();
  const auto policy = ExecutionPolicy::from_environment();
  FileInputs in = load_inputs(o);
  const FramePlan plan = plan_frames(in.total_frames, o.source_fps, c.target_fps);
  const auto s1 = stage1_of(in, plan, c, policy);
  attach_tracker(in, s1.frames);

  if (!sweep.empty()) {
    const auto ws = parse_int_list(sweep);
    std::cout << "w kept removed\n";
    for (const auto& row : sweep_window(s1.frames, *in.tracker, ws, c.match_iou, policy)) {
      std::cout << row.w << ' ' << row.kept << ' ' << row.removed << '\n';
    }
    return kOk;
  }
  const auto r = temporal_filter(s1.frames, *in.tracker, c.filter_window_w, c.match_iou, policy);
  const fs::path dir = out_dir(o);
  {
    std::vector<Detection> kept;
    for (const auto& [f, list] : r.filtered) kept.insert(kept.end(), list.begin(), list.end());
    auto out = open_out(dir / "filtered.txt");
    write_detections(out, kept);
  }
  {
    auto out = open_out(dir / "verdicts.txt");
    for (const auto& v : r.verdicts) {
      out << "verdict id=" << v.detection_id << " frame=" << v.frame << " kept=" << v.kept
          << " run=" << v.longest_run << " tracker_failed=" << v.tracker_failed << '\n';
    }
  }
  std::cout << "w " << c.filter_window_w << " kept " << r.kept << " removed " << r.removed << '\n';
  return kOk;
}

int cmd_sweep_fps(const RunOptions& o, const std::string& rates_text) {
  const RunConfig c = o.run_config();
  const auto policy = ExecutionPolicy::from_environment();
  FileInputs in = load_inputs(o);
  const auto rates = parse_double_list(rates_text);
  std::cout << "fps frames global_count\n";
  for (const double fps : rates) {
    RunConfig rc = c;
    rc.target_fps = fps;
    const FramePlan plan = plan_frames(in.total_frames, o.source_fps, fps);
    attach_tracker(in, stage1_of(in, plan, rc, policy).frames);
    const auto r = run_pipeline(plan, in.prompt, *in.recorded, *in.recorded, *in.tracker, rc, policy);
    std::cout << format_double(fps) << ' ' << plan.kept_indices.size() << ' '
              << r.long_term.report.global_count << '\n';
  }
  return kOk;
}

struct EvalOptions {
  std::string predictions;
  std::vector<std::string> tracks;
  std::string detections;
  bool per_category = false;
};

int cmd_evaluate(const EvalOptions& o) {
  auto pin = open_in(o.predictions);
  const auto preds = parse_predictions(pin).records;

  // Ground-truth counts per (video, category); the video id is the file stem.
  std::map<std::pair<std::string, std::string>, std::int64_t> truth;
  std::map<std::string, std::vector<GroundTruthTrack>> by_video;
  for (const auto& path : o.tracks) {
    const std::string video = fs::path(path).stem().string();
    if (by_video.count(video)) throw ConfigError("tracks", "two track files for video '" + video + "'");
    auto tracks = read_tracks(path);
    for (const auto& t : tracks) ++truth[{video, t.category}];
    by_video[video] = std::move(tracks);
  }
  std::map<std::pair<std::string, std::string>, std::int64_t> predicted;
  for (const auto& p : preds) {
    if (!by_video.count(p.video_id)) {
      throw MetricError("prediction for video '" + p.video_id + "' without a tracks file");
    }
    predicted[{p.video_id, p.category}] = p.count;
  }
  // Missing predictions count as zero; so do categories absent from the truth.
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& [k, v] : truth) keys.insert(k);
  for (const auto& [k, v] : predicted) keys.insert(k);

  EvalInput input;
  if (o.per_category) {
    for (const auto& k : keys) {
      const auto t = truth.count(k) ? truth.at(k) : 0;
      const auto p = predicted.count(k) ? predicted.at(k) : 0;
      input.pairs.push_back({p, t, k.second, k.first});
    }
  } else {
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> per_video;
    for (const auto& [video, tracks] : by_video) per_video[video] = {0, 0};
    for (const auto& k : keys) {
      per_video[k.first].first += predicted.count(k) ? predicted.at(k) : 0;
      per_video[k.first].second += truth.count(k) ? truth.at(k) : 0;
    }
    for (const auto& [video, pt] : per_video) input.pairs.push_back({pt.first, pt.second, "", video});
  }
  const auto e = o.per_category ? multiclass_mae_rmse(input) : video_mae_rmse(input);

  std::cout << (o.per_category ? "video category predicted truth\n" : "video predicted truth\n");
  for (const auto& p : input.pairs) {
    std::cout << p.video_id << ' ';
    if (o.per_category) std::cout << p.category << ' ';
    std::cout << p.predicted << ' ' << p.ground_truth << '\n';
  }
  std::cout << "MAE " << format_double(e.mae) << "\nRMSE " << format_double(e.rmse) << '\n';

  if (!o.detections.empty()) {
    if (by_video.size() != 1) throw ConfigError("detections", "AP needs exactly one tracks file");
    const auto& tracks = by_video.begin()->second;
    std::map<int, ImageEval> images;
    for (const auto& t : tracks) {
      for (const auto& [f, m] : t.per_frame) {
        if (auto b = m.bounds()) images[f].gts.push_back(*b);
      }
    }
    for (auto& d : read_detections(o.detections)) images[d.frame].dets.push_back(std::move(d));
    std::vector<ImageEval> list;
    for (auto& [f, im] : images) list.push_back(std::move(im));
    std::cout << "AP50 " << format_double(mean_image_ap(list, 0.5)) << "\nAP "
              << format_double(mean_image_ap(list, -1.0)) << '\n';
  }
  return kOk;
}

struct RenderOptions {
  std::string masklets;
  std::string base;
  std::string out;
  std::vector<int> frames;
};

int cmd_render(const RenderOptions& o) {
  auto in = open_in(o.masklets);
  const auto masklets = parse_masklets(in).records;
  std::optional<OverlayFrame> base;
  if (!o.base.empty()) {
    auto b = open_in(o.base, std::ios::binary);
    base = read_ppm(b);
  }
  std::vector<int> frames = o.frames;
  if (frames.empty()) {
    std::set<int> all;
    for (const auto& m : masklets) {
      for (const auto& [f, mf] : m.per_frame) all.insert(f);
    }
    frames.assign(all.begin(), all.end());
  }
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  for (const int f : frames) {
    const auto r = base ? render_overlay(*base, masklets, f) : render_overlay(masklets, f);
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d", f);
    {
      auto out = open_out(dir / (std::string(name) + ".ppm"), std::ios::binary);
      write_ppm(out, r.image);
    }
    auto meta = open_out(dir / (std::string(name) + ".txt"));
    meta << "frame=" << f << " visible=" << r.visible << '\n';
  }
  std::cout << "rendered " << frames.size() << " frame(s)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counting objects in videos by tracking detections"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scene");
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_option("--seed", sim.seed, "Scene and noise seed");
  simulate->add_option("--objects", sim.objects, "Number of objects");
  simulate->add_option("--frames", sim.frames, "Number of frames");
  simulate->add_option("--height", sim.height, "Grid height");
  simulate->add_option("--width", sim.width, "Grid width");
  simulate->add_flag("--reentry", sim.reentry, "Staggered entries, exits and re-entries");
  simulate->add_flag("--ellipse", sim.ellipse, "Elliptical objects");
  simulate->add_option("--min-run", sim.min_run, "Drop objects never visible this many frames in a row");
  simulate->add_option("--categories", sim.categories, "Comma-separated categories");
  simulate->add_flag("--emit-detections", sim.emit_detections, "Also write noisy detections");
  simulate->add_option("--fp-rate", sim.fp_rate, "Mean false positives per frame");
  simulate->add_option("--fp-lifetimes", sim.fp_lifetimes, "Comma-separated false positive lifetimes");
  simulate->add_option("--miss", sim.p_miss, "Miss probability");
  simulate->add_option("--jitter", sim.jitter, "Mask jitter sigma in pixels");

  RunOptions count_opts;
  auto* count = app.add_subcommand("count", "Count objects in a detections file");
  count_opts.add_to(count);

  RunOptions filter_opts;
  std::string filter_sweep;
  auto* filter = app.add_subcommand("filter", "Run the temporal filter alone");
  filter_opts.add_to(filter);
  filter->add_option("--sweep", filter_sweep, "Comma-separated windows to sweep");

  RunOptions sweepw_opts;
  std::string windows = "1,2,3,4,5,6";
  auto* sweep_window_cmd = app.add_subcommand("sweep-window", "Filter outcome per window length");
  sweepw_opts.add_to(sweep_window_cmd);
  sweep_window_cmd->add_option("--windows", windows, "Comma-separated windows");

  RunOptions sweepf_opts;
  std::string rates = "0.5,1,2,3";
  auto* sweep_fps_cmd = app.add_subcommand("sweep-fps", "Global count per sampling rate");
  sweepf_opts.add_to(sweep_fps_cmd);
  sweep_fps_cmd->add_option("--rates", rates, "Comma-separated target rates");

  EvalOptions eval;
  auto* evaluate = app.add_subcommand("evaluate", "Counting error against ground truth");
  evaluate->add_option("--predictions", eval.predictions, "Predictions file")->required();
  evaluate->add_option("--tracks", eval.tracks, "Tracks file per video (stem = video id)")->required();
  evaluate->add_option("--detections", eval.detections, "Also report detection AP");
  evaluate->add_flag("--per-category", eval.per_category, "One error term per (video, category)");

  RenderOptions render;
  auto* render_cmd = app.add_subcommand("render", "Overlay masklets on frames (P6 pixmaps)");
  render_cmd->add_option("--masklets", render.masklets, "Masklets file from count")->required();
  render_cmd->add_option("--base", render.base, "Base P6 image");
  render_cmd->add_option("--out", render.out, "Output directory");
  render_cmd->add_option("--frame", render.frames, "Frames to render (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (count->parsed()) return cmd_count(count_opts);
    if (filter->parsed()) return cmd_filter(filter_opts, filter_sweep);
    if (sweep_window_cmd->parsed()) return cmd_filter(sweepw_opts, windows);
    if (sweep_fps_cmd->parsed()) return cmd_sweep_fps(sweepf_opts, rates);
    if (evaluate->parsed()) return cmd_evaluate(eval);
    if (render_cmd->parsed()) return cmd_render(render);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
