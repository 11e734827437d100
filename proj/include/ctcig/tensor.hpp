#pragma once

#include <string>

#include <torch/torch.h>

#include "ctcig/errors.hpp"

namespace ctcig {

/// Real rank-4 array laid out (batch, channel, height, width).
using FeatureMap = torch::Tensor;
/// Complex rank-4 array with the layout of its source FeatureMap.
using Spectrum = torch::Tensor;

inline std::string shape_str(const torch::Tensor& t) {
  std::string s = "(";
  for (int64_t i = 0; i < t.dim(); ++i) s += (i ? "," : "") + std::to_string(t.size(i));
  return s + ")";
}

inline void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.sizes().equals(b.sizes()))
    throw DimensionError(std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
}

inline void require_rank4(const torch::Tensor& t, const char* what) {
  if (t.dim() != 4) throw DimensionError(std::string(what) + " must be rank 4, got " + shape_str(t));
}

}  // namespace ctcig
