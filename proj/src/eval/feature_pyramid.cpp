#include "ctcig/eval/feature_pyramid.hpp"

#include <cmath>

namespace ctcig::eval {

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Box-Muller over a counter-based stream.
torch::Tensor portable_normal(uint64_t seed, at::IntArrayRef shape, double scale) {
  auto t = torch::empty(shape, torch::kDouble);
  auto* p = t.data_ptr<double>();
  const int64_t n = t.numel();
  uint64_t ctr = 0;
  auto uniform = [&] { return (static_cast<double>(mix64(seed ^ mix64(++ctr)) >> 11) + 0.5) * 0x1.0p-53; };
  for (int64_t i = 0; i < n; i += 2) {
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    p[i] = r * std::cos(2.0 * M_PI * u2) * scale;
    if (i + 1 < n) p[i + 1] = r * std::sin(2.0 * M_PI * u2) * scale;
  }
  return t;
}

}  // namespace

TinyFeaturePyramid::TinyFeaturePyramid(uint64_t seed) {
  int64_t in = 3;
  for (int64_t l = 0; l < kLevels; ++l) {
    const double fan_in = static_cast<double>(in * 9);
    weights_.push_back(portable_normal(mix64(seed + 2 * l), {kWidth, in, 3, 3}, std::sqrt(2.0 / fan_in)));
    biases_.push_back(portable_normal(mix64(seed + 2 * l + 1), {kWidth}, 0.05));
    in = kWidth;
  }
}

std::vector<torch::Tensor> TinyFeaturePyramid::features(const torch::Tensor& images) const {
  require_rank4(images, "images");
  if (images.size(1) != 3) throw DimensionError("feature pyramid expects RGB input, got " + shape_str(images));
  std::vector<torch::Tensor> out;
  auto h = images;
  for (int64_t l = 0; l < kLevels; ++l) {
    const auto& w = weights_[static_cast<size_t>(l)].to(images.scalar_type());
    const auto& b = biases_[static_cast<size_t>(l)].to(images.scalar_type());
    h = torch::leaky_relu(torch::conv2d(h, w, b, l == 0 ? 1 : 2, 1), 0.2);
    out.push_back(h);
  }
  return out;
}

torch::Tensor TinyFeaturePyramid::embed(const torch::Tensor& images) const {
  std::vector<torch::Tensor> pooled;
  for (const auto& f : features(images)) pooled.push_back(f.mean({2, 3}));
  return torch::cat(pooled, 1);
}

const TinyFeaturePyramid& TinyFeaturePyramid::shared() {
  static const TinyFeaturePyramid p;
  return p;
}

}  // namespace ctcig::eval
