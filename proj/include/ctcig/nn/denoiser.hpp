#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctcig/tensor.hpp"
#include "ctcig/text/embedder.hpp"

namespace ctcig::nn {

struct DenoiserConfig {
  int64_t in_channels = 3;
  int64_t base_channels = 64;
  std::vector<int64_t> channel_mults{1, 2, 2};
  /// Downsampling factors (1 = full latent resolution) that get cross-attention.
  std::vector<int64_t> attn_resolutions{2, 4};
  int64_t text_dim = 128;
  int64_t time_dim = 128;
  int64_t heads = 4;
  int64_t groups = 8;
  /// Channels of the (cross-normalized) control signal.
  int64_t control_channels = 3;
  double control_scale = 1.2;

  void validate() const;
};

/// Sinusoidal timestep features (batch, dim).
torch::Tensor timestep_embedding(const torch::Tensor& t, int64_t dim);

class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int64_t in, int64_t out, int64_t time_dim, int64_t groups);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& temb);

 private:
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::Linear time_proj_{nullptr};
  torch::nn::Conv2d skip_{nullptr};
};
TORCH_MODULE(ResBlock);

/// Multi-head attention from spatial queries to text tokens. to_q/to_k/to_v/
/// to_out are the trainable "projectors".
class CrossAttentionImpl : public torch::nn::Module {
 public:
  CrossAttentionImpl(int64_t channels, int64_t text_dim, int64_t heads, int64_t groups);
  /// `key_mask` is (batch, tokens) bool, true for valid tokens.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context,
                        const torch::Tensor& key_mask);

  torch::nn::Linear to_q{nullptr}, to_k{nullptr}, to_v{nullptr}, to_out{nullptr};

 private:
  int64_t heads_;
  torch::nn::GroupNorm norm_{nullptr};
};
TORCH_MODULE(CrossAttention);

/// Three-level UNet-style eps predictor with timestep embedding, text
/// cross-attention and a single additive control injection point at the
/// output of the first encoder stage (before downsampling).
class DenoiserImpl : public torch::nn::Module {
 public:
  explicit DenoiserImpl(DenoiserConfig cfg = {});
  const DenoiserConfig& config() const { return cfg_; }

  /// `t` holds one timestep per batch item. `text` may be null (null prompt
  /// for every item); items with zero length use the null row too.
  /// `control` may be undefined (no control).
  FeatureMap forward(const FeatureMap& zt, const torch::Tensor& t, const text::EmbeddingMatrix* text,
                     const FeatureMap& control);

  /// Spatial size of the injection point for a given latent size.
  int64_t injection_size(int64_t latent_size) const { return latent_size; }

 private:
  std::pair<torch::Tensor, torch::Tensor> context_for(const text::EmbeddingMatrix* text,
                                                      int64_t batch, const torch::TensorOptions& opt);

  DenoiserConfig cfg_;
  torch::nn::Linear time1_{nullptr}, time2_{nullptr};
  torch::nn::Conv2d conv_in_{nullptr};
  torch::nn::Conv2d control_proj_{nullptr};
  torch::nn::ModuleList enc_res_, enc_attn_, downs_, dec_res_, dec_attn_, ups_;
  std::vector<bool> enc_has_attn_, dec_has_attn_;
  ResBlock mid1_{nullptr}, mid2_{nullptr};
  CrossAttention mid_attn_{nullptr};
  torch::nn::GroupNorm out_norm_{nullptr};
  torch::nn::Conv2d out_conv_{nullptr};
  torch::Tensor null_text_;
};
TORCH_MODULE(Denoiser);

}  // namespace ctcig::nn
