#include "ctcig/firm/firm.hpp"

#include <c10/util/complex.h>

namespace ctcig::firm {

namespace nn = torch::nn;

Spectrum fft_shift(const Spectrum& x) {
  const int64_t h = x.size(-2), w = x.size(-1);
  return torch::roll(x, {h / 2, w / 2}, {-2, -1});
}

Spectrum ifft_shift(const Spectrum& x) {
  const int64_t h = x.size(-2), w = x.size(-1);
  return torch::roll(x, {-(h / 2), -(w / 2)}, {-2, -1});
}

Spectrum spectrum(const FeatureMap& x) {
  return torch::fft::fft2(x, c10::nullopt, {-2, -1}, "ortho");
}

torch::Tensor inverse_spectrum(const Spectrum& s) {
  return torch::fft::ifft2(s, c10::nullopt, {-2, -1}, "ortho");
}

torch::Tensor reflect_frequencies(const torch::Tensor& x) {
  // k -> -k mod N: flip then roll by one so index 0 stays in place.
  return torch::roll(torch::flip(x, {-2, -1}), {1, 1}, {-2, -1});
}

FirmImpl::FirmImpl(FirmConfig cfg) : cfg_(cfg) {
  ag1_ = register_module(
      "ag1", nn::Conv2d(nn::Conv2dOptions(cfg_.latent_channels, cfg_.hidden_channels, 3).padding(1)));
  ag2_ = register_module(
      "ag2", nn::Conv2d(nn::Conv2dOptions(cfg_.hidden_channels, cfg_.control_channels, 3).padding(1)));
  gate_ = register_parameter("gate", torch::zeros({1}));
}

torch::Tensor FirmImpl::attention_map(const FeatureMap& zt) {
  require_rank4(zt, "z_t");
  auto magnitude = spectrum(zt).abs();
  auto logits = ag2_->forward(torch::silu(ag1_->forward(fft_shift(magnitude))));
  return ifft_shift(2.0 * torch::sigmoid(logits));
}

control::ControlFeature FirmImpl::refine(const control::ControlFeature& ctrl, const FeatureMap& zt) {
  require_rank4(zt, "z_t");
  if (ctrl.data.size(-1) != zt.size(-1) || ctrl.data.size(-2) != zt.size(-2) ||
      ctrl.data.size(0) != zt.size(0))
    throw DimensionError("FIRM: control " + shape_str(ctrl.data) + " not aligned with z_t " +
                         shape_str(zt));
  return refine_with(ctrl, attention_map(zt));
}

control::ControlFeature FirmImpl::refine_with(const control::ControlFeature& ctrl,
                                              const torch::Tensor& attn) {
  control::require_stage(ctrl, control::ControlStage::raw, "FIRM refine");
  require_rank4(ctrl.data, "control feature");
  // Only the Hermitian-symmetric part of A survives the real-valued output;
  // applying it explicitly keeps the inverse transform real.
  auto a = 0.5 * (attn + reflect_frequencies(attn));

  auto x_cf = spectrum(ctrl.data);
  auto x_facf = x_cf * a;
  auto gain = x_facf - x_cf;
  auto x_frcf = x_cf + gate_.to(ctrl.data.scalar_type()) * gain;
  auto back = inverse_spectrum(x_frcf);

  auto residue = torch::imag(back).abs().max().item<double>();
  const double scale = std::max(1.0, torch::real(back).abs().max().item<double>());
  if (residue > kMaxImagResidue * scale)
    throw InternalConsistencyError("FIRM inverse FFT imaginary residue " + std::to_string(residue));
  return {torch::real(back), control::ControlStage::firm_refined};
}

}  // namespace ctcig::firm
