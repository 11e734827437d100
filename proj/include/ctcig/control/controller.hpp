#pragma once

#include <array>
#include <cstdint>

#include "ctcig/control/control_feature.hpp"

namespace ctcig::control {

struct ControllerConfig {
  /// Widths of the three residual blocks; the last equals the latent channels.
  std::array<int64_t, 3> widths{16, 32, 3};
  /// Image-to-latent spatial factor (1, 2, 4 or 8). The first log2(factor)
  /// blocks carry stride 2, the rest stride 1.
  int64_t downsample = 1;
};

/// Plain residual block (no normalization): conv-SiLU-conv plus a projected
/// skip, then SiLU.
class ControlResBlockImpl : public torch::nn::Module {
 public:
  ControlResBlockImpl(int64_t in, int64_t out, int64_t stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, skip_{nullptr};
};
TORCH_MODULE(ControlResBlock);

/// Lightweight mask encoder producing the raw control feature.
class MaskControllerImpl : public torch::nn::Module {
 public:
  explicit MaskControllerImpl(ControllerConfig cfg = {});
  const ControllerConfig& config() const { return cfg_; }

  /// Mask tensor (batch, 1, H, W) with values in {0,1}.
  ControlFeature encode_mask(const torch::Tensor& mask);

 private:
  ControllerConfig cfg_;
  ControlResBlock b1_{nullptr}, b2_{nullptr}, b3_{nullptr};
};
TORCH_MODULE(MaskController);

/// Throws ValidationError with the offending pixel count when `mask` holds
/// values other than 0 and 1.
void validate_binary_mask(const torch::Tensor& mask);

}  // namespace ctcig::control
