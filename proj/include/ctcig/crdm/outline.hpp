#pragma once

#include <array>
#include <cstdint>

#include "ctcig/image/image.hpp"

namespace ctcig::crdm {

/// Square-structuring-element morphology with the given radius; pixels
/// outside the image count as background.
image::BinaryImage dilate(const image::BinaryImage& m, int64_t radius);
image::BinaryImage erode(const image::BinaryImage& m, int64_t radius);

/// Morphological gradient band: dilate(mask, width) minus erode(mask, width).
image::BinaryImage outline_band(const image::BinaryImage& mask, int64_t width);

/// Fully saturated color drawn from `seed`.
std::array<uint8_t, 3> outline_color(uint64_t seed);

/// Blends a semi-transparent colored outline onto the band; every pixel
/// outside the band is left untouched.
image::RgbImage annotate_outline(const image::RgbImage& img, const image::BinaryImage& mask,
                                 int64_t width, double alpha, uint64_t color_seed);

}  // namespace ctcig::crdm
