#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "vidcount/errors.hpp"
#include "vidcount/overlay.hpp"

using namespace vidcount;

namespace {

Masklet masklet(int id, int frame, const BinaryMask& mask, bool present = true) {
  Masklet m;
  m.masklet_id = id;
  m.birth_frame = frame;
  m.per_frame[frame] = {mask, present};
  return m;
}

}  // namespace

TEST(Overlay, ColorFollowsDocumentedMixing) {
  for (int id : {0, 1, 7, 1000}) {
    std::uint64_t s = std::uint64_t(id);
    const std::uint64_t v = oracle::splitmix64(&s);
    const Rgb expected{std::uint8_t((v >> 56) | 0x40), std::uint8_t(((v >> 48) & 0xFF) | 0x40),
                       std::uint8_t(((v >> 40) & 0xFF) | 0x40)};
    EXPECT_EQ(masklet_color(id), expected) << id;
  }
  EXPECT_NE(masklet_color(0), masklet_color(1));
}

TEST(Overlay, NoMaskletsLeavesBaseUnchanged) {
  OverlayFrame base(4, 3);
  for (std::size_t i = 0; i < base.rgb.size(); ++i) base.rgb[i] = std::uint8_t(i * 7);
  const auto r = render_overlay(base, {}, 0);
  EXPECT_EQ(r.image, base);
  EXPECT_EQ(r.visible, 0);
}

TEST(Overlay, BlendsVisibleMaskletsInIdOrder) {
  const auto a = rasterize_box(2, 2, {0, 0, 2, 1});
  const auto b = rasterize_box(2, 2, {1, 0, 1, 2});
  std::vector<Masklet> ms{masklet(1, 0, b), masklet(0, 0, a), masklet(2, 0, a, false)};
  const auto r = render_overlay(OverlayFrame(2, 2), ms, 0);
  EXPECT_EQ(r.visible, 2);
  const Rgb c0 = masklet_color(0), c1 = masklet_color(1);
  // Pixel (0,1) is covered by masklet 0 first, then masklet 1.
  for (int ch = 0; ch < 3; ++ch) {
    const unsigned first = c0[std::size_t(ch)] / 2u;
    EXPECT_EQ(r.image.rgb[std::size_t(3 * 1 + ch)], (first + c1[std::size_t(ch)]) / 2u);
    EXPECT_EQ(r.image.rgb[std::size_t(3 * 0 + ch)], first);
    EXPECT_EQ(r.image.rgb[std::size_t(3 * 2 + ch)], 0u);
  }
}

TEST(Overlay, SameIdSameColorAcrossFrames) {
  const auto a = rasterize_box(3, 3, {0, 0, 1, 1});
  Masklet m = masklet(4, 0, a);
  m.per_frame[5] = {a, true};
  std::vector<Masklet> ms{m};
  EXPECT_EQ(render_overlay(ms, 0).image, render_overlay(ms, 5).image);
}

TEST(Overlay, GridMismatchThrows) {
  std::vector<Masklet> ms{masklet(0, 0, BinaryMask(3, 3))};
  EXPECT_THROW(render_overlay(OverlayFrame(4, 4), ms, 0), ShapeError);
}

TEST(Ppm, RoundTrip) {
  OverlayFrame f(3, 2);
  for (std::size_t i = 0; i < f.rgb.size(); ++i) f.rgb[i] = std::uint8_t(40 * i);
  std::stringstream buf;
  write_ppm(buf, f);
  EXPECT_EQ(buf.str().substr(0, 11), "P6\n3 2\n255\n");
  EXPECT_EQ(read_ppm(buf), f);
}

TEST(Ppm, RejectsBadInput) {
  std::istringstream p3("P3\n1 1\n255\n0 0 0\n");
  EXPECT_THROW(read_ppm(p3), FormatError);
  std::istringstream shortdata("P6\n2 2\n255\nabc");
  EXPECT_THROW(read_ppm(shortdata), FormatError);
  std::istringstream comment("P6\n# made by hand\n1 1\n255\nabc");
  EXPECT_EQ(read_ppm(comment).rgb, (std::vector<std::uint8_t>{'a', 'b', 'c'}));
}
