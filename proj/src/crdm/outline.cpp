#include "ctcig/crdm/outline.hpp"

#include <array>
#include <cmath>

namespace ctcig::crdm {

namespace {

image::BinaryImage morph(const image::BinaryImage& m, int64_t r, bool dilation) {
  // Separable: the square element is the product of two 1-D windows.
  auto pass = [&](const image::BinaryImage& in, bool horizontal) {
    image::BinaryImage out(in.width, in.height);
    for (int64_t y = 0; y < in.height; ++y)
      for (int64_t x = 0; x < in.width; ++x) {
        bool acc = !dilation;
        for (int64_t d = -r; d <= r; ++d) {
          const int64_t xx = horizontal ? x + d : x, yy = horizontal ? y : y + d;
          const bool inside = xx >= 0 && yy >= 0 && xx < in.width && yy < in.height;
          const bool v = inside && in.at(xx, yy);
          acc = dilation ? (acc || v) : (acc && v);
        }
        out.at(x, y) = acc ? 1 : 0;
      }
    return out;
  };
  return pass(pass(m, true), false);
}

}  // namespace

image::BinaryImage dilate(const image::BinaryImage& m, int64_t radius) { return morph(m, radius, true); }
image::BinaryImage erode(const image::BinaryImage& m, int64_t radius) { return morph(m, radius, false); }

image::BinaryImage outline_band(const image::BinaryImage& mask, int64_t width) {
  auto d = dilate(mask, width);
  const auto e = erode(mask, width);
  for (size_t i = 0; i < d.bits.size(); ++i) d.bits[i] = d.bits[i] && !e.bits[i];
  return d;
}

std::array<uint8_t, 3> outline_color(uint64_t seed) {
  uint64_t x = seed + 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  x ^= x >> 31;
  const double hue = static_cast<double>(x >> 11) * 0x1.0p-53 * 6.0;
  const double f = hue - std::floor(hue);
  const auto up = static_cast<uint8_t>(std::lround(255.0 * f));
  const auto down = static_cast<uint8_t>(255 - up);
  switch (static_cast<int>(hue)) {
    case 0: return {255, up, 0};
    case 1: return {down, 255, 0};
    case 2: return {0, 255, up};
    case 3: return {0, down, 255};
    case 4: return {up, 0, 255};
    default: return {255, 0, down};
  }
}

image::RgbImage annotate_outline(const image::RgbImage& img, const image::BinaryImage& mask,
                                 int64_t width, double alpha, uint64_t color_seed) {
  if (img.width != mask.width || img.height != mask.height)
    throw ValidationError("image and mask resolutions differ");
  if (width < 1) throw ValidationError("outline width must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("outline alpha must lie in (0, 1]");
  if (mask.area() == 0) throw ValidationError("empty mask: no object to outline");

  const auto band = outline_band(mask, width);
  const auto color = outline_color(color_seed);
  image::RgbImage out = img;
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) {
      if (!band.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - alpha) * img.at(x, y, c) + alpha * color[static_cast<size_t>(c)];
        out.at(x, y, c) = static_cast<uint8_t>(std::lround(v));
      }
    }
  return out;
}

}  // namespace ctcig::crdm
