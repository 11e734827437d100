#pragma once

#include <cstdint>

#include "ctcig/control/control_feature.hpp"

namespace ctcig::firm {

/// Circular shift by floor(N/2) along the two trailing (spatial) axes.
Spectrum fft_shift(const Spectrum& x);
/// Exact inverse of fft_shift for odd and even sizes.
Spectrum ifft_shift(const Spectrum& x);

/// Orthonormal 2-D FFT / inverse over the two trailing axes.
Spectrum spectrum(const FeatureMap& x);
torch::Tensor inverse_spectrum(const Spectrum& s);

/// Maps each spatial frequency index k to -k (mod N) on both trailing axes.
torch::Tensor reflect_frequencies(const torch::Tensor& x);

/// Largest tolerated imaginary residue after the inverse FFT.
inline constexpr double kMaxImagResidue = 1e-5;

struct FirmConfig {
  int64_t latent_channels = 3;
  int64_t control_channels = 3;
  int64_t hidden_channels = 16;
};

/// Frequency Interaction Refinement Module parameters: a two-convolution
/// attention generator over the shifted magnitude spectrum of z_t and a
/// scalar gate (initialized 0).
class FirmImpl : public torch::nn::Module {
 public:
  explicit FirmImpl(FirmConfig cfg = {});
  const FirmConfig& config() const { return cfg_; }

  /// A = ifft_shift(AG(fft_shift(|FFT(z_t)|))), real and in (0,2).
  torch::Tensor attention_map(const FeatureMap& zt);

  /// Gated attention refinement of a raw control feature in the frequency
  /// domain. Output stage is firm_refined.
  control::ControlFeature refine(const control::ControlFeature& ctrl, const FeatureMap& zt);

  /// Same as refine() with a caller-supplied attention map.
  control::ControlFeature refine_with(const control::ControlFeature& ctrl, const torch::Tensor& attn);

  torch::Tensor& gate() { return gate_; }
  torch::nn::Conv2d& ag_conv1() { return ag1_; }
  torch::nn::Conv2d& ag_conv2() { return ag2_; }

  /// FFT size multiplier; fixed at 1 (transform size equals feature size).
  static constexpr double fft_scale = 1.0;

 private:
  FirmConfig cfg_;
  torch::nn::Conv2d ag1_{nullptr}, ag2_{nullptr};
  torch::Tensor gate_;
};
TORCH_MODULE(Firm);

}  // namespace ctcig::firm
