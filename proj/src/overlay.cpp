#include "vidcount/overlay.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <string>

#include "vidcount/errors.hpp"
#include "vidcount/prng.hpp"

namespace vidcount {

Rgb masklet_color(int masklet_id) {
  SplitMix64 rng(static_cast<std::uint64_t>(static_cast<std::int64_t>(masklet_id)));
  const std::uint64_t v = rng.next();
  return {static_cast<std::uint8_t>((v >> 56) | 0x40),
          static_cast<std::uint8_t>(((v >> 48) & 0xFF) | 0x40),
          static_cast<std::uint8_t>(((v >> 40) & 0xFF) | 0x40)};
}

RenderedFrame render_overlay(const OverlayFrame& base, std::span<const Masklet> masklets,
                             int frame) {
  std::vector<const Masklet*> order;
  order.reserve(masklets.size());
  for (const auto& m : masklets) order.push_back(&m);
  std::stable_sort(order.begin(), order.end(),
                   [](const Masklet* a, const Masklet* b) { return a->masklet_id < b->masklet_id; });

  RenderedFrame out{base, 0};
  for (const Masklet* m : order) {
    const auto it = m->per_frame.find(frame);
    if (it == m->per_frame.end()) continue;
    const BinaryMask& mask = it->second.mask;
    if (mask.height() != base.height || mask.width() != base.width) {
      throw ShapeError("masklet " + std::to_string(m->masklet_id) + " mask is " +
                       std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                       ", overlay is " + std::to_string(base.height) + "x" +
                       std::to_string(base.width));
    }
    if (!it->second.present || mask.empty()) continue;
    ++out.visible;
    const Rgb c = masklet_color(m->masklet_id);
    std::size_t pos = 0;
    bool on = false;
    for (const std::uint32_t run : mask.runs()) {
      if (on) {
        for (std::size_t p = pos; p < pos + run; ++p) {
          for (int ch = 0; ch < 3; ++ch) {
            auto& px = out.image.rgb[3 * p + std::size_t(ch)];
            px = static_cast<std::uint8_t>((unsigned(px) + unsigned(c[std::size_t(ch)])) / 2);
          }
        }
      }
      pos += run;
      on = !on;
    }
  }
  return out;
}

RenderedFrame render_overlay(std::span<const Masklet> masklets, int frame) {
  int h = 0, w = 0;
  for (const auto& m : masklets) {
    if (!m.per_frame.empty()) {
      h = m.per_frame.begin()->second.mask.height();
      w = m.per_frame.begin()->second.mask.width();
      break;
    }
  }
  return render_overlay(OverlayFrame(w, h), masklets, frame);
}

void write_ppm(std::ostream& out, const OverlayFrame& frame) {
  out << "P6\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()),
            static_cast<std::streamsize>(frame.rgb.size()));
  if (!out) throw IoError("failed to write pixmap");
}

namespace {

int read_header_int(std::istream& in) {
  // Skip whitespace and '#' comments between header fields.
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v) || v < 0) throw FormatError("malformed pixmap header");
  return v;
}

}  // namespace

OverlayFrame read_ppm(std::istream& in) {
  std::string magic;
  if (!(in >> magic) || magic != "P6") throw FormatError("not a binary pixmap (P6)");
  const int w = read_header_int(in);
  const int h = read_header_int(in);
  const int maxval = read_header_int(in);
  if (maxval != 255) throw FormatError("only maxval 255 is supported");
  if (w > 1 << 15 || h > 1 << 15) throw FormatError("pixmap too large");
  if (!std::isspace(in.get())) throw FormatError("malformed pixmap header");
  OverlayFrame f(w, h);
  in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(f.rgb.size())) {
    throw FormatError("truncated pixmap data");
  }
  return f;
}

}  // namespace vidcount
