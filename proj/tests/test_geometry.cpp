#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vidcount/errors.hpp"
#include "vidcount/geometry.hpp"
#include "vidcount/prng.hpp"

using namespace vidcount;

namespace {

BoundingBox random_box(SplitMix64& rng, int cells_per_unit) {
  // Edges on a 1/cells_per_unit lattice so the raster oracle is exact.
  auto q = [&](double lo, double hi) {
    return double(rng.uniform_int(std::int64_t(lo * cells_per_unit),
                                  std::int64_t(hi * cells_per_unit))) /
           cells_per_unit;
  };
  return {q(0, 8), q(0, 8), q(0.25, 6), q(0.25, 6)};
}

}  // namespace

TEST(BoxIou, WorkedExamples) {
  EXPECT_NEAR(box_iou({0, 0, 2, 2}, {1, 0, 2, 2}), 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(box_iou({0, 0, 1, 1}, {2, 0, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(box_iou({3, 4, 5, 6}, {3, 4, 5, 6}), 1.0);
}

TEST(BoxIou, InvalidBoxesThrow) {
  EXPECT_THROW(box_iou({0, 0, -1, 1}, {0, 0, 1, 1}), GeometryError);
  EXPECT_THROW(box_iou({0, 0, 0, 0}, {1, 1, 0, 0}), GeometryError);
  EXPECT_THROW(box_giou({0, 0, 1, std::nan("")}, {0, 0, 1, 1}), GeometryError);
}

TEST(BoxGiou, WorkedExamples) {
  EXPECT_NEAR(box_giou({0, 0, 1, 1}, {2, 0, 1, 1}), -1.0 / 3.0, 1e-12);
  EXPECT_EQ(box_giou({0, 0, 4, 4}, {1, 1, 2, 2}), 0.25);
  EXPECT_NEAR(box_giou({0, 0, 2, 2}, {1, 0, 2, 2}), 1.0 / 3.0, 1e-12);
}

TEST(BoxGiou, ContainmentEqualsIouExactly) {
  SplitMix64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const BoundingBox outer{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(1, 10),
                            rng.uniform(1, 10)};
    const double fx = rng.uniform(), fy = rng.uniform();
    const double w = outer.width * rng.uniform(0.05, 1.0), h = outer.height * rng.uniform(0.05, 1.0);
    const BoundingBox inner{outer.x_min + fx * (outer.width - w),
                            outer.y_min + fy * (outer.height - h), w, h};
    if (!(inner.x_max() <= outer.x_max() && inner.y_max() <= outer.y_max())) continue;
    EXPECT_EQ(box_giou(outer, inner), box_iou(outer, inner));
    EXPECT_EQ(box_giou(inner, outer), box_iou(inner, outer));
  }
}

TEST(BoxIou, AgreesWithRasterOracle) {
  SplitMix64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    const BoundingBox a = random_box(rng, 16), b = random_box(rng, 16);
    const auto o = oracle::raster_iou(a, b, 16);
    EXPECT_NEAR(box_iou(a, b), o.iou, 1e-9);
    EXPECT_NEAR(box_giou(a, b), o.giou, 1e-9);
  }
}

TEST(BoxIou, SymmetricAndBounded) {
  SplitMix64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const BoundingBox a{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 4), rng.uniform(0.1, 4)};
    const BoundingBox b{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 4), rng.uniform(0.1, 4)};
    const double iou = box_iou(a, b), giou = box_giou(a, b);
    EXPECT_EQ(iou, box_iou(b, a));
    EXPECT_EQ(giou, box_giou(b, a));
    EXPECT_GE(iou, 0.0);
    EXPECT_LE(iou, 1.0);
    EXPECT_GE(giou, -1.0);
    EXPECT_LE(giou, iou + 1e-15);
  }
}

TEST(Loss, TermsFromWorkedBoxes) {
  const auto t = exemplar_loss_terms({0.5, 0.5, 0.4, 0.4}, {0.5, 0.5, 0.2, 0.2});
  EXPECT_DOUBLE_EQ(t.l_center, 0.0);
  EXPECT_NEAR(t.l_hw, 0.4, 1e-12);
  EXPECT_NEAR(t.l_giou, 0.75, 1e-12);

  const auto s = exemplar_loss_terms({0.3, 0.5, 0.2, 0.2}, {0.5, 0.5, 0.2, 0.2});
  EXPECT_NEAR(s.l_center, 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(s.l_hw, 0.0);
}

TEST(Loss, TotalIsExact) {
  EXPECT_EQ(total_loss({0.0, 0.4, 0.75}, 0.1, LossWeights{}), 3.7);
  EXPECT_EQ(total_loss({0.0, 0.0, 0.0}, 0.0, LossWeights{}), 0.0);
}

TEST(Loss, RejectsNegativeInputs) {
  EXPECT_THROW(total_loss({}, -0.1, LossWeights{}), ConfigError);
  EXPECT_THROW(total_loss({}, 0.1, LossWeights{-1, 2, 2}), ConfigError);
  try {
    total_loss({}, 0.0, LossWeights{5, -2, 2});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "lambda_giou");
  }
}

TEST(Rle, HandEnumeratedDiagonal) {
  Bitmap bm(2, 2);
  bm.at(0, 0) = 1;
  bm.at(1, 1) = 1;
  const BinaryMask m = rle_encode(bm);
  EXPECT_EQ(m.runs(), (std::vector<std::uint32_t>{0, 1, 2, 1}));
  EXPECT_EQ(rle_decode(m), bm);
  EXPECT_EQ(m.area(), 2u);
}

TEST(Rle, AllZerosAndAllOnes) {
  const BinaryMask zeros(3, 4);
  EXPECT_EQ(zeros.runs(), (std::vector<std::uint32_t>{12}));
  EXPECT_TRUE(zeros.empty());
  Bitmap ones(3, 4);
  std::fill(ones.pixels.begin(), ones.pixels.end(), 1);
  EXPECT_EQ(rle_encode(ones).runs(), (std::vector<std::uint32_t>{0, 12}));
}

TEST(Rle, FromRunsValidatesAndCanonicalizes) {
  EXPECT_THROW(BinaryMask::from_runs(2, 2, {1, 1}), FormatError);
  EXPECT_THROW(BinaryMask::from_runs(2, 2, {1, 4}), FormatError);
  // Zero-length interior runs merge their neighbours.
  const auto m = BinaryMask::from_runs(2, 2, {1, 1, 0, 1, 1});
  EXPECT_EQ(m.runs(), (std::vector<std::uint32_t>{1, 2, 1}));
}

TEST(Rle, ShapeMismatchThrows) {
  Bitmap bm(2, 2);
  bm.pixels.pop_back();
  EXPECT_THROW(rle_encode(bm), ShapeError);
}

TEST(Rle, RoundTripAgainstOracleEncoder) {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = int(rng.uniform_int(1, 12)), w = int(rng.uniform_int(1, 12));
    const double density = rng.uniform();
    oracle::Dense d(h, w);
    Bitmap bm(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::uint8_t v = rng.bernoulli(density);
        d.at(r, c) = v;
        bm.at(r, c) = v;
      }
    }
    const BinaryMask m = rle_encode(bm);
    EXPECT_EQ(m, oracle::from_dense(d));
    EXPECT_EQ(rle_decode(m), bm);
    EXPECT_EQ(oracle::to_dense(m).px, d.px);
  }
}

TEST(MaskIou, HandEnumeratedCase) {
  Bitmap a(2, 2), b(2, 2);
  a.at(0, 0) = a.at(0, 1) = 1;
  b.at(0, 1) = b.at(1, 1) = 1;
  EXPECT_NEAR(mask_iou(rle_encode(a), rle_encode(b)), 1.0 / 3.0, 1e-15);
}

TEST(MaskIou, EmptyMasksAndGridMismatch) {
  EXPECT_EQ(mask_iou(BinaryMask(4, 4), BinaryMask(4, 4)), 0.0);
  EXPECT_THROW(mask_iou(BinaryMask(4, 4), BinaryMask(4, 5)), ShapeError);
}

TEST(MaskIou, AgreesWithBruteForce) {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 400; ++trial) {
    const int h = int(rng.uniform_int(1, 20)), w = int(rng.uniform_int(1, 20));
    oracle::Dense a(h, w), b(h, w);
    const double pa = rng.uniform(), pb = rng.uniform();
    for (auto& p : a.px) p = rng.bernoulli(pa);
    for (auto& p : b.px) p = rng.bernoulli(pb);
    const auto ma = oracle::from_dense(a), mb = oracle::from_dense(b);
    const double expected = oracle::dense_iou(a, b);
    EXPECT_DOUBLE_EQ(mask_iou(ma, mb), expected);
    EXPECT_DOUBLE_EQ(mask_iou(mb, ma), expected);
    const auto u = oracle::to_dense(mask_union(ma, mb));
    for (std::size_t k = 0; k < u.px.size(); ++k) ASSERT_EQ(u.px[k], a.px[k] | b.px[k]);
  }
}

TEST(Raster, BoxMatchesPixelCenterOracle) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = rng.uniform(-4, 20), y = rng.uniform(-4, 20);
    const double w = rng.uniform(0, 12), h = rng.uniform(0, 12);
    const auto m = rasterize_box(16, 18, {x, y, w, h});
    EXPECT_EQ(oracle::to_dense(m).px, oracle::raster_box(16, 18, x, y, w, h).px);
  }
}

TEST(Raster, EllipseInsideItsBox) {
  const BoundingBox box{2, 3, 10, 6};
  const auto e = rasterize_ellipse(20, 20, box);
  const auto r = rasterize_box(20, 20, box);
  EXPECT_GT(e.area(), 0u);
  EXPECT_LT(e.area(), r.area());
  EXPECT_EQ(mask_intersection_area(e, r), e.area());
}

TEST(Shift, MovesAndClips) {
  const auto m = rasterize_box(6, 6, {0, 0, 2, 2});
  const auto s = shift_mask(m, 1, 2);
  EXPECT_EQ(s, rasterize_box(6, 6, {1, 2, 2, 2}));
  EXPECT_TRUE(shift_mask(m, -3, 0).empty());
  EXPECT_EQ(shift_mask(m, -1, 0).area(), 2u);
}

TEST(Bounds, TightPixelBox) {
  const auto m = rasterize_box(10, 10, {2, 3, 4, 2});
  const auto b = m.bounds();
  ASSERT_TRUE(b.has_value());
  EXPECT_EQ(*b, (BoundingBox{2, 3, 4, 2}));
  EXPECT_FALSE(BinaryMask(3, 3).bounds().has_value());
}

TEST(MaskBuilder, MergesAdjacentSpansAndRejectsBackwards) {
  MaskBuilder b(2, 4);
  b.add_span(1, 2);
  b.add_span(3, 2);
  const auto m = std::move(b).finish();
  EXPECT_EQ(m.runs(), (std::vector<std::uint32_t>{1, 4, 3}));
  MaskBuilder bad(2, 4);
  bad.add_span(4, 1);
  EXPECT_THROW(bad.add_span(2, 1), ContractError);
}
