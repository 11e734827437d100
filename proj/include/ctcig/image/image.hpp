#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctcig/tensor.hpp"

namespace ctcig::image {

/// 8-bit RGB, row-major, interleaved.
struct RgbImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int64_t w, int64_t h) : width(w), height(h), pixels(static_cast<size_t>(w * h * 3), 0) {}

  uint8_t& at(int64_t x, int64_t y, int c) { return pixels[static_cast<size_t>((y * width + x) * 3 + c)]; }
  uint8_t at(int64_t x, int64_t y, int c) const {
    return pixels[static_cast<size_t>((y * width + x) * 3 + c)];
  }
  bool operator==(const RgbImage&) const = default;
};

/// Single-channel mask with values 0 or 1.
struct BinaryImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> bits;

  BinaryImage() = default;
  BinaryImage(int64_t w, int64_t h) : width(w), height(h), bits(static_cast<size_t>(w * h), 0) {}

  uint8_t& at(int64_t x, int64_t y) { return bits[static_cast<size_t>(y * width + x)]; }
  uint8_t at(int64_t x, int64_t y) const { return bits[static_cast<size_t>(y * width + x)]; }
  int64_t area() const;
  bool operator==(const BinaryImage&) const = default;
};

/// (3, H, W) tensor in [-1, 1].
torch::Tensor to_tensor(const RgbImage& img, torch::ScalarType dtype = torch::kFloat);
/// Inverse of to_tensor with rounding and clamping; accepts (3,H,W) or (1,3,H,W).
RgbImage from_tensor(const torch::Tensor& t);
/// (1, H, W) tensor of 0/1.
torch::Tensor to_tensor(const BinaryImage& m, torch::ScalarType dtype = torch::kFloat);

RgbImage read_png_rgb(const std::filesystem::path& path);
/// Reads a mask PNG as grayscale and thresholds at `threshold` (>= is 1).
BinaryImage read_png_mask(const std::filesystem::path& path, int threshold = 128);
void write_png(const std::filesystem::path& path, const RgbImage& img);
/// Writes 0/255 grayscale.
void write_png(const std::filesystem::path& path, const BinaryImage& mask);
std::string encode_png(const RgbImage& img);
RgbImage decode_png(const std::string& bytes);

}  // namespace ctcig::image
