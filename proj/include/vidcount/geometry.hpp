#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vidcount {

/// Axis-aligned box in pixel coordinates, stored as corner plus extent.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double width = 0.0;
  double height = 0.0;

  double x_max() const { return x_min + width; }
  double y_max() const { return y_min + height; }
  double area() const { return width * height; }

  // Non-negative extent and finite coordinates.
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Center form (cx, cy, w, h) used by box regression losses.
struct CenterBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  BoundingBox to_corner() const { return {cx - w / 2, cy - h / 2, w, h}; }
  static CenterBox from_corner(const BoundingBox& b) {
    return {b.x_min + b.width / 2, b.y_min + b.height / 2, b.width, b.height};
  }

  friend bool operator==(const CenterBox&, const CenterBox&) = default;
};

/// Dense row-major 0/1 image.
struct Bitmap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Bitmap() = default;
  Bitmap(int h, int w) : height(h), width(w), pixels(std::size_t(h) * std::size_t(w), 0) {}

  std::uint8_t& at(int row, int col) { return pixels[std::size_t(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return pixels[std::size_t(row) * width + col]; }

  friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

/// Binary mask on an integer grid, run-length encoded in row-major order.
///
/// Runs alternate zero-pixels / one-pixels and always start with a zero-run,
/// which may have length 0. The stored form is canonical: every run after the
/// first is positive, so two masks are equal iff their pixels are equal.
class BinaryMask {
 public:
  using Run = std::uint32_t;

  BinaryMask() = default;

  // All-zero mask on an h x w grid.
  BinaryMask(int height, int width);

  // Validates that runs cover exactly height*width pixels, then canonicalizes.
  // Throws FormatError on a run-sum mismatch or negative dimensions.
  static BinaryMask from_runs(int height, int width, std::vector<Run> runs);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint64_t grid_area() const { return std::uint64_t(height_) * std::uint64_t(width_); }
  const std::vector<Run>& runs() const { return runs_; }

  // Number of one-pixels.
  std::uint64_t area() const;
  bool empty() const { return area() == 0; }
  bool same_grid(const BinaryMask& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  // Tight pixel-aligned bounds of the one-pixels; nullopt for an empty mask.
  std::optional<BoundingBox> bounds() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Run> runs_{0};
};

/// Incremental RLE encoder fed with one-pixel spans in increasing row-major
/// order. Lets callers build masks from a bounding region without touching the
/// whole grid.
class MaskBuilder {
 public:
  MaskBuilder(int height, int width);

  // Marks [index, index + length) as ones. Spans must not go backwards.
  void add_span(std::uint64_t index, std::uint64_t length);
  void add_pixel(int row, int col) { add_span(std::uint64_t(row) * width_ + col, 1); }

  BinaryMask finish() &&;

 private:
  int height_;
  int width_;
  std::uint64_t cursor_ = 0;  // first pixel not yet emitted
  std::vector<BinaryMask::Run> runs_;
};

BinaryMask rle_encode(const Bitmap& bitmap);
Bitmap rle_decode(const BinaryMask& mask);

// Pixels whose centers fall inside the box.
BinaryMask rasterize_box(int height, int width, const BoundingBox& box);
// Pixels whose centers fall inside the ellipse inscribed in the box.
BinaryMask rasterize_ellipse(int height, int width, const BoundingBox& box);

// Translates a mask by whole pixels; pixels leaving the grid are dropped.
BinaryMask shift_mask(const BinaryMask& mask, int dx, int dy);

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
std::uint64_t mask_intersection_area(const BinaryMask& a, const BinaryMask& b);

double box_iou(const BoundingBox& a, const BoundingBox& b);
double box_giou(const BoundingBox& a, const BoundingBox& b);

// |a AND b| / |a OR b|; 0 when both masks are empty. Throws ShapeError when
// the grids differ.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

struct LossWeights {
  double lambda_loc = 5.0;
  double lambda_giou = 2.0;
  double lambda_cls = 2.0;
};

struct ExemplarLossTerms {
  double l_center = 0.0;  // |dcx| + |dcy|
  double l_hw = 0.0;      // |dw| + |dh|
  double l_giou = 0.0;    // 1 - GIoU

  friend bool operator==(const ExemplarLossTerms&, const ExemplarLossTerms&) = default;
};

ExemplarLossTerms exemplar_loss_terms(const CenterBox& pred, const CenterBox& gt);

// lambda_loc * (l_hw + l_center) + lambda_giou * l_giou + lambda_cls * l_cls.
// Throws ConfigError on negative weights or a negative classification loss.
double total_loss(const ExemplarLossTerms& terms, double l_cls, const LossWeights& weights);

}  // namespace vidcount
