#include "vidcount/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vidcount/errors.hpp"

namespace vidcount {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::shape: return "shape";
    case ErrorKind::format: return "format";
    case ErrorKind::parse: return "parse";
    case ErrorKind::config: return "config";
    case ErrorKind::stage: return "stage";
    case ErrorKind::metric: return "metric";
    case ErrorKind::contract: return "contract";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(width) &&
         std::isfinite(height) && width >= 0.0 && height >= 0.0;
}

namespace {

// Half-open [begin, end) span of one-pixels in row-major index space.
struct Span {
  std::uint64_t begin;
  std::uint64_t end;
};

template <typename Fn>
void for_each_span(const BinaryMask& mask, Fn&& fn) {
  std::uint64_t pos = 0;
  const auto& runs = mask.runs();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i % 2 == 1 && runs[i] > 0) fn(Span{pos, pos + runs[i]});
    pos += runs[i];
  }
}

std::vector<Span> spans_of(const BinaryMask& mask) {
  std::vector<Span> out;
  out.reserve(mask.runs().size() / 2);
  for_each_span(mask, [&](Span s) { out.push_back(s); });
  return out;
}

void require_same_grid(const BinaryMask& a, const BinaryMask& b, const char* op) {
  if (!a.same_grid(b)) {
    throw ShapeError(std::string(op) + ": grid " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                     "x" + std::to_string(b.width()));
  }
}

void require_valid(const BoundingBox& b, const char* op) {
  if (!b.valid()) throw GeometryError(std::string(op) + ": invalid box");
}

}  // namespace

BinaryMask::BinaryMask(int height, int width) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw FormatError("negative mask dimensions");
  runs_ = {static_cast<Run>(grid_area())};
}

BinaryMask BinaryMask::from_runs(int height, int width, std::vector<Run> runs) {
  if (height < 0 || width < 0) throw FormatError("negative mask dimensions");
  std::uint64_t total = 0;
  for (Run r : runs) total += r;
  const std::uint64_t expected = std::uint64_t(height) * std::uint64_t(width);
  if (total != expected) {
    throw FormatError("run lengths sum to " + std::to_string(total) + ", grid " +
                      std::to_string(height) + "x" + std::to_string(width) +
                      " needs " + std::to_string(expected));
  }

  // Merge across zero-length runs so every run after the first is positive.
  std::vector<Run> canon{0};
  bool canon_value = false;  // value of canon.back()
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i] == 0) continue;
    const bool value = (i % 2) == 1;
    if (value == canon_value) {
      canon.back() += runs[i];
    } else {
      canon.push_back(runs[i]);
      canon_value = value;
    }
  }

  BinaryMask m;
  m.height_ = height;
  m.width_ = width;
  m.runs_ = std::move(canon);
  return m;
}

std::uint64_t BinaryMask::area() const {
  std::uint64_t ones = 0;
  for (std::size_t i = 1; i < runs_.size(); i += 2) ones += runs_[i];
  return ones;
}

std::optional<BoundingBox> BinaryMask::bounds() const {
  if (width_ == 0) return std::nullopt;
  const std::uint64_t w = std::uint64_t(width_);
  bool any = false;
  std::uint64_t min_r = 0, max_r = 0, min_c = 0, max_c = 0;
  for_each_span(*this, [&](Span s) {
    const std::uint64_t r0 = s.begin / w, c0 = s.begin % w;
    const std::uint64_t r1 = (s.end - 1) / w, c1 = (s.end - 1) % w;
    const std::uint64_t lo = r1 > r0 ? 0 : c0;
    const std::uint64_t hi = r1 > r0 ? w - 1 : c1;
    if (!any) {
      min_r = r0, max_r = r1, min_c = lo, max_c = hi;
      any = true;
    } else {
      min_r = std::min(min_r, r0);
      max_r = std::max(max_r, r1);
      min_c = std::min(min_c, lo);
      max_c = std::max(max_c, hi);
    }
  });
  if (!any) return std::nullopt;
  return BoundingBox{double(min_c), double(min_r), double(max_c - min_c + 1),
                     double(max_r - min_r + 1)};
}

MaskBuilder::MaskBuilder(int height, int width) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw FormatError("negative mask dimensions");
}

void MaskBuilder::add_span(std::uint64_t index, std::uint64_t length) {
  if (length == 0) return;
  const std::uint64_t total = std::uint64_t(height_) * std::uint64_t(width_);
  if (index < cursor_ || index + length > total) {
    throw ContractError("MaskBuilder: span out of order or off the grid");
  }
  if (runs_.empty()) {
    runs_.push_back(static_cast<BinaryMask::Run>(index));
    runs_.push_back(static_cast<BinaryMask::Run>(length));
  } else if (index == cursor_) {
    runs_.back() += static_cast<BinaryMask::Run>(length);
  } else {
    runs_.push_back(static_cast<BinaryMask::Run>(index - cursor_));
    runs_.push_back(static_cast<BinaryMask::Run>(length));
  }
  cursor_ = index + length;
}

BinaryMask MaskBuilder::finish() && {
  const std::uint64_t total = std::uint64_t(height_) * std::uint64_t(width_);
  if (runs_.empty()) return BinaryMask(height_, width_);
  if (cursor_ < total) runs_.push_back(static_cast<BinaryMask::Run>(total - cursor_));
  return BinaryMask::from_runs(height_, width_, std::move(runs_));
}

BinaryMask rle_encode(const Bitmap& bitmap) {
  if (bitmap.height < 0 || bitmap.width < 0 ||
      bitmap.pixels.size() != std::size_t(bitmap.height) * std::size_t(bitmap.width)) {
    throw ShapeError("bitmap holds " + std::to_string(bitmap.pixels.size()) +
                     " pixels, declared grid " + std::to_string(bitmap.height) + "x" +
                     std::to_string(bitmap.width));
  }
  MaskBuilder builder(bitmap.height, bitmap.width);
  const auto& px = bitmap.pixels;
  std::size_t i = 0;
  while (i < px.size()) {
    if (!px[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < px.size() && px[j]) ++j;
    builder.add_span(i, j - i);
    i = j;
  }
  return std::move(builder).finish();
}

Bitmap rle_decode(const BinaryMask& mask) {
  Bitmap out(mask.height(), mask.width());
  for_each_span(mask, [&](Span s) {
    std::fill(out.pixels.begin() + std::ptrdiff_t(s.begin),
              out.pixels.begin() + std::ptrdiff_t(s.end), std::uint8_t{1});
  });
  return out;
}

namespace {

// Columns c with c + 0.5 in [lo, hi), clipped to [0, limit).
std::pair<int, int> center_range(double lo, double hi, int limit) {
  const double first = std::ceil(lo - 0.5);
  const double last = std::ceil(hi - 0.5) - 1;
  const int a = static_cast<int>(std::clamp(first, 0.0, double(limit)));
  const int b = static_cast<int>(std::clamp(last, -1.0, double(limit) - 1));
  return {a, b};
}

}  // namespace

BinaryMask rasterize_box(int height, int width, const BoundingBox& box) {
  require_valid(box, "rasterize_box");
  MaskBuilder builder(height, width);
  const auto [c0, c1] = center_range(box.x_min, box.x_max(), width);
  const auto [r0, r1] = center_range(box.y_min, box.y_max(), height);
  if (c0 <= c1) {
    for (int r = r0; r <= r1; ++r) {
      builder.add_span(std::uint64_t(r) * width + c0, std::uint64_t(c1 - c0 + 1));
    }
  }
  return std::move(builder).finish();
}

BinaryMask rasterize_ellipse(int height, int width, const BoundingBox& box) {
  require_valid(box, "rasterize_ellipse");
  MaskBuilder builder(height, width);
  const double a = box.width / 2, b = box.height / 2;
  if (a <= 0 || b <= 0) return std::move(builder).finish();
  const double cx = box.x_min + a, cy = box.y_min + b;
  const auto [r0, r1] = center_range(box.y_min, box.y_max(), height);
  for (int r = r0; r <= r1; ++r) {
    const double dy = (r + 0.5 - cy) / b;
    const double t = 1.0 - dy * dy;
    if (t < 0) continue;
    const double half = a * std::sqrt(t);
    // Inclusive bound on the ellipse edge: nudge hi so a center exactly on it counts.
    const auto [c0, c1] = center_range(cx - half, std::nextafter(cx + half, INFINITY), width);
    if (c0 <= c1) builder.add_span(std::uint64_t(r) * width + c0, std::uint64_t(c1 - c0 + 1));
  }
  return std::move(builder).finish();
}

BinaryMask shift_mask(const BinaryMask& mask, int dx, int dy) {
  const int h = mask.height(), w = mask.width();
  MaskBuilder builder(h, w);
  if (w == 0) return std::move(builder).finish();
  for_each_span(mask, [&](Span s) {
    std::uint64_t pos = s.begin;
    while (pos < s.end) {
      const auto row = static_cast<std::int64_t>(pos / std::uint64_t(w));
      const auto col = static_cast<std::int64_t>(pos % std::uint64_t(w));
      const std::uint64_t row_end = std::min<std::uint64_t>(s.end, std::uint64_t(row + 1) * w);
      const auto len = static_cast<std::int64_t>(row_end - pos);
      const std::int64_t nr = row + dy;
      std::int64_t nc0 = col + dx, nc1 = col + len - 1 + dx;
      nc0 = std::max<std::int64_t>(nc0, 0);
      nc1 = std::min<std::int64_t>(nc1, w - 1);
      if (nr >= 0 && nr < h && nc0 <= nc1) {
        builder.add_span(std::uint64_t(nr) * w + std::uint64_t(nc0), std::uint64_t(nc1 - nc0 + 1));
      }
      pos = row_end;
    }
  });
  return std::move(builder).finish();
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a, b, "mask_union");
  const auto sa = spans_of(a), sb = spans_of(b);
  MaskBuilder builder(a.height(), a.width());
  std::size_t i = 0, j = 0;
  bool open = false;
  Span cur{0, 0};
  while (i < sa.size() || j < sb.size()) {
    const bool take_a = j >= sb.size() || (i < sa.size() && sa[i].begin <= sb[j].begin);
    const Span next = take_a ? sa[i++] : sb[j++];
    if (open && next.begin <= cur.end) {
      cur.end = std::max(cur.end, next.end);
    } else {
      if (open) builder.add_span(cur.begin, cur.end - cur.begin);
      cur = next;
      open = true;
    }
  }
  if (open) builder.add_span(cur.begin, cur.end - cur.begin);
  return std::move(builder).finish();
}

std::uint64_t mask_intersection_area(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a, b, "mask_intersection_area");
  const auto& ra = a.runs();
  const auto& rb = b.runs();
  // Walk both run lists in lockstep; each step advances to the nearer boundary.
  std::size_t i = 0, j = 0;
  std::uint64_t left_a = ra[0], left_b = rb[0];
  std::uint64_t inter = 0;
  while (i < ra.size() && j < rb.size()) {
    const std::uint64_t step = std::min(left_a, left_b);
    if ((i % 2 == 1) && (j % 2 == 1)) inter += step;
    left_a -= step;
    left_b -= step;
    if (left_a == 0 && ++i < ra.size()) left_a = ra[i];
    if (left_b == 0 && ++j < rb.size()) left_b = rb[j];
  }
  return inter;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a, b, "mask_iou");
  const std::uint64_t inter = mask_intersection_area(a, b);
  const std::uint64_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 0.0;
  return double(inter) / double(uni);
}

namespace {

struct Overlap {
  double inter;
  double uni;
};

Overlap overlap(const BoundingBox& a, const BoundingBox& b, const char* op) {
  require_valid(a, op);
  require_valid(b, op);
  if (a.area() <= 0.0 && b.area() <= 0.0) {
    throw GeometryError(std::string(op) + ": overlap undefined for two degenerate boxes");
  }
  const double iw = std::max(0.0, std::min(a.x_max(), b.x_max()) - std::max(a.x_min, b.x_min));
  const double ih = std::max(0.0, std::min(a.y_max(), b.y_max()) - std::max(a.y_min, b.y_min));
  const double inter = iw * ih;
  return {inter, a.area() + b.area() - inter};
}

}  // namespace

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const auto [inter, uni] = overlap(a, b, "box_iou");
  return std::clamp(inter / uni, 0.0, 1.0);
}

double box_giou(const BoundingBox& a, const BoundingBox& b) {
  const auto [inter, uni] = overlap(a, b, "box_giou");
  const auto contains = [](const BoundingBox& outer, const BoundingBox& inner) {
    return outer.x_min <= inner.x_min && outer.y_min <= inner.y_min &&
           inner.x_max() <= outer.x_max() && inner.y_max() <= outer.y_max();
  };
  // Hull is the outer box, so the penalty term vanishes exactly.
  if (contains(a, b) || contains(b, a)) return std::clamp(inter / uni, 0.0, 1.0);
  const double hull_w = std::max(a.x_max(), b.x_max()) - std::min(a.x_min, b.x_min);
  const double hull_h = std::max(a.y_max(), b.y_max()) - std::min(a.y_min, b.y_min);
  const double hull = hull_w * hull_h;
  const double iou = std::clamp(inter / uni, 0.0, 1.0);
  return iou - (hull - uni) / hull;
}

ExemplarLossTerms exemplar_loss_terms(const CenterBox& pred, const CenterBox& gt) {
  const BoundingBox p = pred.to_corner(), g = gt.to_corner();
  ExemplarLossTerms t;
  t.l_center = std::abs(pred.cx - gt.cx) + std::abs(pred.cy - gt.cy);
  t.l_hw = std::abs(pred.w - gt.w) + std::abs(pred.h - gt.h);
  t.l_giou = 1.0 - box_giou(p, g);
  return t;
}

double total_loss(const ExemplarLossTerms& terms, double l_cls, const LossWeights& weights) {
  if (!(weights.lambda_loc >= 0)) throw ConfigError("lambda_loc", "must be >= 0");
  if (!(weights.lambda_giou >= 0)) throw ConfigError("lambda_giou", "must be >= 0");
  if (!(weights.lambda_cls >= 0)) throw ConfigError("lambda_cls", "must be >= 0");
  if (!(l_cls >= 0)) throw ConfigError("l_cls", "classification loss must be >= 0");
  return weights.lambda_loc * (terms.l_hw + terms.l_center) + weights.lambda_giou * terms.l_giou +
         weights.lambda_cls * l_cls;
}

}  // namespace vidcount
