#include "vidcount/interchange.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "vidcount/errors.hpp"

namespace vidcount {

void Prompt::validate(int total_frames) const {
  if (!text && exemplars.empty()) {
    throw ContractError("prompt needs text, exemplars, or both");
  }
  for (const auto& e : exemplars) {
    if (e.frame < 0 || e.frame >= total_frames) {
      throw ContractError("exemplar frame " + std::to_string(e.frame) +
                          " outside the video (" + std::to_string(total_frames) + " frames)");
    }
    if (!e.box.valid()) throw ContractError("invalid exemplar box");
  }
}

std::string_view to_string(CausalMode mode) {
  switch (mode) {
    case CausalMode::offline: return "offline";
    case CausalMode::lagged: return "lagged";
    case CausalMode::immediate: return "immediate";
  }
  return "offline";
}

std::optional<CausalMode> parse_causal_mode(std::string_view text) {
  if (text == "offline") return CausalMode::offline;
  if (text == "lagged") return CausalMode::lagged;
  if (text == "immediate") return CausalMode::immediate;
  return std::nullopt;
}

void RunConfig::validate() const {
  auto ratio = [](const char* key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must be in [0, 1]");
  };
  if (!(std::isfinite(target_fps) && target_fps > 0.0)) {
    throw ConfigError("target_fps", "must be a positive number");
  }
  if (filter_window_w < 1) throw ConfigError("filter_window_w", "must be >= 1");
  ratio("match_iou", match_iou);
  ratio("new_object_iou", new_object_iou);
  ratio("score_threshold", score_threshold);
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------------------
// Record tokenizer: `<type> key=value key="quoted value" ...`

struct Field {
  std::string key;
  std::string value;
  bool used = false;
};

struct Record {
  std::size_t line = 0;
  std::string type;
  std::vector<Field> fields;

  const std::string* find(std::string_view key) {
    for (auto& f : fields) {
      if (f.key == key) {
        f.used = true;
        return &f.value;
      }
    }
    return nullptr;
  }

  const std::string& require(std::string_view key) {
    const std::string* v = find(key);
    if (!v) throw ParseError(line, "missing key '" + std::string(key) + "'");
    return *v;
  }

  std::size_t unused() const {
    std::size_t n = 0;
    for (const auto& f : fields) n += f.used ? 0 : 1;
    return n;
  }
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

Record tokenize(std::string_view text, std::size_t line) {
  Record rec;
  rec.line = line;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < text.size() && is_space(text[i])) ++i;
  };
  skip();
  while (i < text.size() && !is_space(text[i])) rec.type.push_back(text[i++]);
  std::set<std::string, std::less<>> seen;
  for (skip(); i < text.size(); skip()) {
    Field field;
    while (i < text.size() && text[i] != '=' && !is_space(text[i])) field.key.push_back(text[i++]);
    if (field.key.empty() || i >= text.size() || text[i] != '=') {
      throw ParseError(line, "expected key=value near column " + std::to_string(i + 1));
    }
    ++i;  // '='
    if (i < text.size() && text[i] == '"') {
      ++i;
      bool closed = false;
      while (i < text.size()) {
        const char c = text[i++];
        if (c == '"') {
          closed = true;
          break;
        }
        if (c == '\\') {
          if (i >= text.size() || (text[i] != '"' && text[i] != '\\')) {
            throw ParseError(line, "bad escape in quoted value");
          }
          field.value.push_back(text[i++]);
        } else {
          field.value.push_back(c);
        }
      }
      if (!closed) throw ParseError(line, "unterminated quoted value");
      if (i < text.size() && !is_space(text[i])) throw ParseError(line, "junk after quoted value");
    } else {
      while (i < text.size() && !is_space(text[i])) {
        if (text[i] == '"') throw ParseError(line, "stray quote in value");
        field.value.push_back(text[i++]);
      }
    }
    if (!seen.insert(field.key).second) throw ParseError(line, "duplicate key '" + field.key + "'");
    rec.fields.push_back(std::move(field));
  }
  return rec;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\n' || c == '\r') throw ContractError("string values cannot contain line breaks");
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

bool valid_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (is_space(c) || c == '"' || c == '\n' || c == '=' ) return false;
  }
  return true;
}

template <typename Int>
std::optional<Int> to_int(std::string_view s) {
  Int v{};
  if (s.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> to_double(std::string_view s) {
  double v{};
  if (s.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

int get_int(Record& rec, std::string_view key, int min_value) {
  const auto& raw = rec.require(key);
  auto v = to_int<int>(raw);
  if (!v) throw ParseError(rec.line, "key '" + std::string(key) + "': not an integer: " + raw);
  if (*v < min_value) {
    throw ParseError(rec.line, "key '" + std::string(key) + "': must be >= " + std::to_string(min_value));
  }
  return *v;
}

double get_finite(Record& rec, std::string_view key) {
  const auto& raw = rec.require(key);
  auto v = to_double(raw);
  if (!v || !std::isfinite(*v)) {
    throw ParseError(rec.line, "key '" + std::string(key) + "': not a finite number: " + raw);
  }
  return *v;
}

BinaryMask get_mask(Record& rec, std::string_view key) {
  const auto& raw = rec.require(key);
  try {
    return parse_mask(raw);
  } catch (const FormatError& e) {
    throw FormatError(e.what(), rec.line);
  }
}

// Reads logical records, skipping blank and comment lines.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = 0;
    while (first < line.size() && is_space(line[first])) ++first;
    if (first == line.size() || line[first] == '#') continue;
    fn(tokenize(line, lineno));
  }
}

}  // namespace

std::string format_mask(const BinaryMask& mask) {
  std::string out = std::to_string(mask.height()) + "x" + std::to_string(mask.width()) + ":";
  const auto& runs = mask.runs();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(runs[i]);
  }
  return out;
}

BinaryMask parse_mask(std::string_view text) {
  const auto x = text.find('x');
  const auto colon = text.find(':');
  if (x == std::string_view::npos || colon == std::string_view::npos || x > colon) {
    throw FormatError("mask must look like <h>x<w>:<runs>");
  }
  const auto h = to_int<int>(text.substr(0, x));
  const auto w = to_int<int>(text.substr(x + 1, colon - x - 1));
  if (!h || !w || *h < 0 || *w < 0) throw FormatError("bad mask dimensions");
  std::vector<BinaryMask::Run> runs;
  std::string_view rest = text.substr(colon + 1);
  while (true) {
    const auto comma = rest.find(',');
    const auto piece = rest.substr(0, comma);
    const auto v = to_int<BinaryMask::Run>(piece);
    if (!v) throw FormatError("bad run length '" + std::string(piece) + "'");
    runs.push_back(*v);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return BinaryMask::from_runs(*h, *w, std::move(runs));
}

// ---------------------------------------------------------------------------
// Detections

std::string format_detection(const Detection& d) {
  if (!valid_token(d.id)) throw ContractError("detection id must be a non-empty token: '" + d.id + "'");
  std::string out = "det frame=" + std::to_string(d.frame) + " x=" + format_double(d.box.x_min) +
                    " y=" + format_double(d.box.y_min) + " w=" + format_double(d.box.width) +
                    " h=" + format_double(d.box.height) + " score=" + format_double(d.score) +
                    " label=" + quote(d.label);
  if (d.mask) out += " mask=" + format_mask(*d.mask);
  out += " id=" + d.id;
  return out;
}

void write_detections(std::ostream& out, const std::vector<Detection>& detections) {
  for (const auto& d : detections) out << format_detection(d) << '\n';
}

Parsed<Detection> parse_detection_stream(std::istream& in) {
  Parsed<Detection> result;
  std::unordered_set<std::string> ids;
  for_each_record(in, [&](Record rec) {
    if (rec.type != "det") throw ParseError(rec.line, "expected a 'det' record, got '" + rec.type + "'");
    Detection d;
    d.frame = get_int(rec, "frame", 0);
    d.box = {get_finite(rec, "x"), get_finite(rec, "y"), get_finite(rec, "w"), get_finite(rec, "h")};
    if (!d.box.valid()) throw ParseError(rec.line, "box width and height must be >= 0");
    d.score = get_finite(rec, "score");
    if (d.score < 0.0 || d.score > 1.0) throw ParseError(rec.line, "score must be in [0, 1]");
    d.label = rec.require("label");
    if (rec.find("mask")) d.mask = get_mask(rec, "mask");
    if (const auto* id = rec.find("id")) {
      if (!valid_token(*id)) throw ParseError(rec.line, "bad detection id");
      d.id = *id;
    } else {
      d.id = "line" + std::to_string(rec.line);
    }
    if (!ids.insert(d.id).second) throw ParseError(rec.line, "duplicate detection id '" + d.id + "'");
    result.warnings += rec.unused();
    result.records.push_back(std::move(d));
  });
  return result;
}

// ---------------------------------------------------------------------------
// Tracks

void write_tracks(std::ostream& out, const std::vector<GroundTruthTrack>& tracks) {
  for (const auto& t : tracks) {
    if (!valid_token(t.track_id)) throw ContractError("track id must be a non-empty token");
    for (const auto& [frame, mask] : t.per_frame) {
      out << "trk id=" << t.track_id << " category=" << quote(t.category) << " frame=" << frame
          << " mask=" << format_mask(mask) << '\n';
    }
  }
}

Parsed<GroundTruthTrack> parse_track_annotations(std::istream& in) {
  Parsed<GroundTruthTrack> result;
  std::unordered_set<std::string> closed;
  for_each_record(in, [&](Record rec) {
    if (rec.type != "trk") throw ParseError(rec.line, "expected a 'trk' record, got '" + rec.type + "'");
    const std::string id = rec.require("id");
    if (!valid_token(id)) throw ParseError(rec.line, "bad track id");
    std::string category = rec.require("category");
    const int frame = get_int(rec, "frame", 0);
    BinaryMask mask = get_mask(rec, "mask");
    result.warnings += rec.unused();

    auto& tracks = result.records;
    if (tracks.empty() || tracks.back().track_id != id) {
      if (!tracks.empty()) closed.insert(tracks.back().track_id);
      if (closed.count(id)) throw ParseError(rec.line, "duplicate track id '" + id + "'");
      tracks.push_back({id, category, {}});
    }
    auto& track = tracks.back();
    if (track.category != category) {
      throw ParseError(rec.line, "duplicate track id '" + id + "' with a different category");
    }
    if (!track.per_frame.empty() && !track.per_frame.begin()->second.same_grid(mask)) {
      throw FormatError("track '" + id + "' changes mask grid", rec.line);
    }
    if (!track.per_frame.emplace(frame, std::move(mask)).second) {
      throw ParseError(rec.line, "track '" + id + "' repeats frame " + std::to_string(frame));
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Run configuration

RunConfig load_run_config(std::istream& in) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string_view s) {
    while (!s.empty() && (is_space(s.front()) || s.front() == '\n')) s.remove_prefix(1);
    while (!s.empty() && (is_space(s.back()) || s.back() == '\n')) s.remove_suffix(1);
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(lineno, "expected key=value");
    const std::string key(trim(body.substr(0, eq)));
    const std::string_view value = trim(body.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(key, "given more than once");

    auto number = [&]() {
      auto v = to_double(value);
      if (!v) throw ConfigError(key, "not a number: '" + std::string(value) + "'");
      return *v;
    };
    if (key == "target_fps") {
      cfg.target_fps = number();
    } else if (key == "filter_window_w") {
      auto v = to_int<int>(value);
      if (!v) throw ConfigError(key, "not an integer: '" + std::string(value) + "'");
      cfg.filter_window_w = *v;
    } else if (key == "match_iou") {
      cfg.match_iou = number();
    } else if (key == "new_object_iou") {
      cfg.new_object_iou = number();
    } else if (key == "score_threshold") {
      cfg.score_threshold = number();
    } else if (key == "causal_mode") {
      auto m = parse_causal_mode(value);
      if (!m) throw ConfigError(key, "expected offline, lagged, or immediate");
      cfg.causal_mode = *m;
    } else if (key == "seed") {
      auto v = to_int<std::uint64_t>(value);
      if (!v) throw ConfigError(key, "not an unsigned 64-bit integer");
      cfg.seed = *v;
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  cfg.validate();
  return cfg;
}

void write_run_config(std::ostream& out, const RunConfig& c) {
  out << "target_fps=" << format_double(c.target_fps) << '\n'
      << "filter_window_w=" << c.filter_window_w << '\n'
      << "match_iou=" << format_double(c.match_iou) << '\n'
      << "new_object_iou=" << format_double(c.new_object_iou) << '\n'
      << "score_threshold=" << format_double(c.score_threshold) << '\n'
      << "causal_mode=" << to_string(c.causal_mode) << '\n'
      << "seed=" << c.seed << '\n';
}

// ---------------------------------------------------------------------------
// Predictions, masklets, reports

Parsed<CountPrediction> parse_predictions(std::istream& in) {
  Parsed<CountPrediction> result;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_record(in, [&](Record rec) {
    if (rec.type != "pred") throw ParseError(rec.line, "expected a 'pred' record, got '" + rec.type + "'");
    CountPrediction p;
    p.video_id = rec.require("video");
    p.category = rec.require("category");
    auto count = to_int<std::int64_t>(rec.require("count"));
    if (!count || *count < 0) throw ParseError(rec.line, "count must be a non-negative integer");
    p.count = *count;
    if (!seen.emplace(p.video_id, p.category).second) {
      throw ParseError(rec.line, "duplicate prediction for video '" + p.video_id + "' category '" +
                                     p.category + "'");
    }
    result.warnings += rec.unused();
    result.records.push_back(std::move(p));
  });
  return result;
}

void write_predictions(std::ostream& out, const std::vector<CountPrediction>& preds) {
  for (const auto& p : preds) {
    out << "pred video=" << quote(p.video_id) << " category=" << quote(p.category)
        << " count=" << p.count << '\n';
  }
}

void write_masklets(std::ostream& out, const std::vector<Masklet>& masklets) {
  for (const auto& m : masklets) {
    for (const auto& [frame, f] : m.per_frame) {
      out << "msk id=" << m.masklet_id << " birth=" << m.birth_frame << " label=" << quote(m.label)
          << " frame=" << frame << " present=" << (f.present ? 1 : 0)
          << " mask=" << format_mask(f.mask) << '\n';
    }
  }
}

Parsed<Masklet> parse_masklets(std::istream& in) {
  Parsed<Masklet> result;
  std::unordered_set<int> closed;
  for_each_record(in, [&](Record rec) {
    if (rec.type != "msk") throw ParseError(rec.line, "expected a 'msk' record, got '" + rec.type + "'");
    const int id = get_int(rec, "id", 0);
    const int birth = get_int(rec, "birth", 0);
    std::string label = rec.require("label");
    const int frame = get_int(rec, "frame", 0);
    const int present = get_int(rec, "present", 0);
    if (present > 1) throw ParseError(rec.line, "present must be 0 or 1");
    BinaryMask mask = get_mask(rec, "mask");
    result.warnings += rec.unused();

    auto& out = result.records;
    if (out.empty() || out.back().masklet_id != id) {
      if (!out.empty()) closed.insert(out.back().masklet_id);
      if (closed.count(id)) throw ParseError(rec.line, "duplicate masklet id " + std::to_string(id));
      out.push_back({id, birth, label, {}});
    }
    auto& m = out.back();
    if (m.birth_frame != birth || m.label != label) {
      throw ParseError(rec.line, "masklet " + std::to_string(id) + " changes birth frame or label");
    }
    if (!m.per_frame.emplace(frame, MaskletFrame{std::move(mask), present == 1}).second) {
      throw ParseError(rec.line, "masklet repeats frame " + std::to_string(frame));
    }
  });
  return result;
}

void write_count_report(std::ostream& out, const CountReport& r) {
  out << "report global=" << r.global_count << " tracker_errors=" << r.tracker_errors << '\n';
  for (const auto& b : r.births) out << "birth masklet=" << b.masklet_id << " frame=" << b.frame << '\n';
  for (const auto& [frame, n] : r.per_frame_visible) {
    out << "visible frame=" << frame << " count=" << n << '\n';
  }
}

}  // namespace vidcount
