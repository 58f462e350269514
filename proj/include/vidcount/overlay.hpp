#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "vidcount/interchange.hpp"

namespace vidcount {

/// Packed 8-bit RGB image, row-major.
struct OverlayFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 * width * height

  OverlayFrame() = default;
  OverlayFrame(int w, int h) : width(w), height(h), rgb(std::size_t(3) * w * h, 0) {}

  friend bool operator==(const OverlayFrame&, const OverlayFrame&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;

// v = first output of SplitMix64(masklet_id);
// r = (v >> 56) | 0x40, g = ((v >> 48) & 0xFF) | 0x40, b = ((v >> 40) & 0xFF) | 0x40.
// The 0x40 floor keeps tints visible on a black background.
Rgb masklet_color(int masklet_id);

struct RenderedFrame {
  OverlayFrame image;
  int visible = 0;  // masklets present with a nonempty mask on the frame
};

// Blends each visible masklet's color 50/50 into the base, in masklet_id
// order. Throws ShapeError when a masklet mask or the base is not on the
// same grid as the others.
RenderedFrame render_overlay(const OverlayFrame& base, std::span<const Masklet> masklets,
                             int frame);

// Same, over a black frame sized from the masklets (0x0 when there are none).
RenderedFrame render_overlay(std::span<const Masklet> masklets, int frame);

// Binary P6 with maxval 255. read_ppm throws FormatError on anything else.
void write_ppm(std::ostream& out, const OverlayFrame& frame);
OverlayFrame read_ppm(std::istream& in);

}  // namespace vidcount
