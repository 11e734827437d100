#pragma once

#include <cstdint>
#include <vector>

#include "ctcig/tensor.hpp"

namespace ctcig::eval {

/// Frozen three-level convolutional pyramid with weights drawn from a
/// pinned seed by a portable generator (never from the torch RNG), so its
/// features are stable across builds. Serves as the tiny_fixed embedding
/// provider (global-average-pooled, 3 x 64 = 192 dims) and as the
/// perceptual-loss feature extractor.
class TinyFeaturePyramid {
 public:
  static constexpr uint64_t kPinnedSeed = 0xC0FFEE1234ULL;
  static constexpr int64_t kWidth = 64;
  static constexpr int64_t kLevels = 3;
  static constexpr int64_t kEmbeddingDim = kWidth * kLevels;

  explicit TinyFeaturePyramid(uint64_t seed = kPinnedSeed);

  /// Per-level activations for images (B,3,H,W) in [-1,1]; differentiable.
  std::vector<torch::Tensor> features(const torch::Tensor& images) const;
  /// (B, 192) pooled embedding.
  torch::Tensor embed(const torch::Tensor& images) const;

  static const TinyFeaturePyramid& shared();

 private:
  std::vector<torch::Tensor> weights_, biases_;  // double
};

}  // namespace ctcig::eval
