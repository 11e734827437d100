#include "ctcig/nn/denoiser.hpp"

#include <algorithm>
#include <cmath>

namespace ctcig::nn {

namespace tnn = torch::nn;

void DenoiserConfig::validate() const {
  if (in_channels < 1) throw ConfigError("in_channels", "must be >= 1");
  if (base_channels < 1) throw ConfigError("base_channels", "must be >= 1");
  if (channel_mults.empty()) throw ConfigError("channel_mults", "must not be empty");
  if (!(control_scale > 0.0)) throw ConfigError("control_scale", "must be > 0");
  if (time_dim < 2 || time_dim % 2) throw ConfigError("time_dim", "must be even");
  for (auto m : channel_mults)
    if ((base_channels * m) % groups) throw ConfigError("groups", "must divide every level width");
  for (auto r : attn_resolutions) {
    const auto max_ds = int64_t{1} << (channel_mults.size() - 1);
    if (r < 1 || r > max_ds || (r & (r - 1)))
      throw ConfigError("attn_resolutions", "entries must be powers of two within the level range");
  }
  if (base_channels % heads) throw ConfigError("heads", "must divide base_channels");
}

torch::Tensor timestep_embedding(const torch::Tensor& t, int64_t dim) {
  const int64_t half = dim / 2;
  auto freqs = torch::exp(-std::log(10000.0) * torch::arange(half, torch::kDouble) /
                          static_cast<double>(half));
  auto args = t.to(torch::kDouble).view({-1, 1}) * freqs.view({1, -1});
  return torch::cat({torch::cos(args), torch::sin(args)}, 1);
}

ResBlockImpl::ResBlockImpl(int64_t in, int64_t out, int64_t time_dim, int64_t groups) {
  norm1_ = register_module("norm1", tnn::GroupNorm(tnn::GroupNormOptions(groups, in)));
  conv1_ = register_module("conv1", tnn::Conv2d(tnn::Conv2dOptions(in, out, 3).padding(1)));
  time_proj_ = register_module("time_proj", tnn::Linear(time_dim, out));
  norm2_ = register_module("norm2", tnn::GroupNorm(tnn::GroupNormOptions(groups, out)));
  conv2_ = register_module("conv2", tnn::Conv2d(tnn::Conv2dOptions(out, out, 3).padding(1)));
  if (in != out) skip_ = register_module("skip", tnn::Conv2d(tnn::Conv2dOptions(in, out, 1)));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& temb) {
  auto h = conv1_->forward(torch::silu(norm1_->forward(x)));
  h = h + time_proj_->forward(torch::silu(temb)).unsqueeze(-1).unsqueeze(-1);
  h = conv2_->forward(torch::silu(norm2_->forward(h)));
  return h + (skip_ ? skip_->forward(x) : x);
}

CrossAttentionImpl::CrossAttentionImpl(int64_t channels, int64_t text_dim, int64_t heads,
                                       int64_t groups)
    : heads_(heads) {
  norm_ = register_module("norm", tnn::GroupNorm(tnn::GroupNormOptions(groups, channels)));
  to_q = register_module("to_q", tnn::Linear(tnn::LinearOptions(channels, channels).bias(false)));
  to_k = register_module("to_k", tnn::Linear(tnn::LinearOptions(text_dim, channels).bias(false)));
  to_v = register_module("to_v", tnn::Linear(tnn::LinearOptions(text_dim, channels).bias(false)));
  to_out = register_module("to_out", tnn::Linear(channels, channels));
}

torch::Tensor CrossAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& context,
                                          const torch::Tensor& key_mask) {
  const int64_t b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const int64_t n = context.size(1), dh = c / heads_;
  auto tokens = norm_->forward(x).flatten(2).transpose(1, 2);  // (b, hw, c)
  auto q = to_q->forward(tokens).view({b, h * w, heads_, dh}).transpose(1, 2);
  auto k = to_k->forward(context).view({b, n, heads_, dh}).transpose(1, 2);
  auto v = to_v->forward(context).view({b, n, heads_, dh}).transpose(1, 2);
  auto scores = torch::matmul(q, k.transpose(-1, -2)) / std::sqrt(static_cast<double>(dh));
  scores = scores.masked_fill(key_mask.logical_not().view({b, 1, 1, n}),
                              -std::numeric_limits<double>::infinity());
  auto attn = torch::matmul(torch::softmax(scores, -1), v);  // (b, heads, hw, dh)
  auto out = to_out->forward(attn.transpose(1, 2).reshape({b, h * w, c}));
  return x + out.transpose(1, 2).view({b, c, h, w});
}

DenoiserImpl::DenoiserImpl(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto& mults = cfg_.channel_mults;
  const int64_t base = cfg_.base_channels, td = cfg_.time_dim, g = cfg_.groups;
  auto has_attn = [&](int64_t ds) {
    return std::find(cfg_.attn_resolutions.begin(), cfg_.attn_resolutions.end(), ds) !=
           cfg_.attn_resolutions.end();
  };

  time1_ = register_module("time1", tnn::Linear(td, td));
  time2_ = register_module("time2", tnn::Linear(td, td));
  conv_in_ = register_module("conv_in", tnn::Conv2d(tnn::Conv2dOptions(cfg_.in_channels, base, 3).padding(1)));
  control_proj_ = register_module(
      "control_proj", tnn::Conv2d(tnn::Conv2dOptions(cfg_.control_channels, base, 1).bias(false)));

  std::vector<int64_t> widths;
  int64_t prev = base, ds = 1;
  for (size_t l = 0; l < mults.size(); ++l) {
    const int64_t ch = base * mults[l];
    enc_res_->push_back(ResBlock(prev, ch, td, g));
    enc_has_attn_.push_back(has_attn(ds));
    enc_attn_->push_back(CrossAttention(ch, cfg_.text_dim, cfg_.heads, g));
    if (l + 1 < mults.size()) {
      downs_->push_back(tnn::Conv2d(tnn::Conv2dOptions(ch, ch, 3).stride(2).padding(1)));
      ds *= 2;
    }
    widths.push_back(ch);
    prev = ch;
  }
  mid1_ = ResBlock(prev, prev, td, g);
  mid_attn_ = CrossAttention(prev, cfg_.text_dim, cfg_.heads, g);
  mid2_ = ResBlock(prev, prev, td, g);

  for (size_t i = 0; i < mults.size(); ++i) {
    const size_t l = mults.size() - 1 - i;
    const int64_t ch = widths[l];
    dec_res_->push_back(ResBlock(prev + ch, ch, td, g));
    dec_has_attn_.push_back(has_attn(ds));
    dec_attn_->push_back(CrossAttention(ch, cfg_.text_dim, cfg_.heads, g));
    if (l > 0) {
      ups_->push_back(tnn::Conv2d(tnn::Conv2dOptions(ch, ch, 3).padding(1)));
      ds /= 2;
    }
    prev = ch;
  }
  // Attention modules on levels without attention are never called; drop
  // them from the registered tree so they do not inflate parameter counts.
  tnn::ModuleList enc_attn, dec_attn;
  for (size_t l = 0; l < mults.size(); ++l) {
    if (enc_has_attn_[l]) enc_attn->push_back(enc_attn_[l]);
    if (dec_has_attn_[l]) dec_attn->push_back(dec_attn_[l]);
  }
  enc_attn_ = enc_attn;
  dec_attn_ = dec_attn;

  register_module("enc_res", enc_res_);
  register_module("enc_attn", enc_attn_);
  register_module("downs", downs_);
  register_module("mid1", mid1_);
  register_module("mid_attn", mid_attn_);
  register_module("mid2", mid2_);
  register_module("dec_res", dec_res_);
  register_module("dec_attn", dec_attn_);
  register_module("ups", ups_);
  out_norm_ = register_module("out_norm", tnn::GroupNorm(tnn::GroupNormOptions(g, base)));
  out_conv_ = register_module("out_conv", tnn::Conv2d(tnn::Conv2dOptions(base, cfg_.in_channels, 3).padding(1)));
  null_text_ = register_parameter("null_text", torch::zeros({1, 1, cfg_.text_dim}));
}

std::pair<torch::Tensor, torch::Tensor> DenoiserImpl::context_for(const text::EmbeddingMatrix* text,
                                                                  int64_t batch,
                                                                  const torch::TensorOptions& opt) {
  auto null_ctx = null_text_.to(opt.dtype());
  if (!text) {
    auto ctx = null_ctx.expand({batch, 1, cfg_.text_dim});
    return {ctx, torch::ones({batch, 1}, torch::kBool)};
  }
  if (text->data.dim() != 3 || text->data.size(0) != batch || text->data.size(2) != cfg_.text_dim)
    throw DimensionError("text embedding " + shape_str(text->data) + " does not match batch " +
                         std::to_string(batch) + " x text_dim " + std::to_string(cfg_.text_dim));
  const int64_t n = text->data.size(1);
  auto ctx = text->data.to(opt.dtype());
  auto lengths = torch::tensor(text->lengths, torch::kLong);
  auto mask = torch::arange(n, torch::kLong).view({1, n}) < lengths.view({-1, 1});
  auto empty = (lengths == 0);
  if (empty.any().item<bool>()) {
    // Items without tokens attend to the null row at position 0.
    auto e = empty.view({-1, 1, 1}).to(opt.dtype());
    auto null_rows = torch::cat({null_ctx.expand({batch, 1, cfg_.text_dim}),
                                 torch::zeros({batch, n - 1, cfg_.text_dim}, opt)},
                                1);
    ctx = ctx * (1 - e) + null_rows * e;
    mask.select(1, 0).logical_or_(empty);
  }
  return {ctx, mask};
}

FeatureMap DenoiserImpl::forward(const FeatureMap& zt, const torch::Tensor& t,
                                 const text::EmbeddingMatrix* text, const FeatureMap& control) {
  require_rank4(zt, "z_t");
  if (zt.size(1) != cfg_.in_channels)
    throw DimensionError("z_t has " + std::to_string(zt.size(1)) + " channels, denoiser expects " +
                         std::to_string(cfg_.in_channels));
  const int64_t levels = static_cast<int64_t>(cfg_.channel_mults.size());
  const int64_t factor = int64_t{1} << (levels - 1);
  if (zt.size(2) % factor || zt.size(3) % factor)
    throw DimensionError("latent size " + shape_str(zt) + " not divisible by " + std::to_string(factor));
  const int64_t batch = zt.size(0);
  if (t.numel() != batch) throw DimensionError("need one timestep per batch item");

  auto temb = timestep_embedding(t, cfg_.time_dim).to(zt.scalar_type());
  temb = time2_->forward(torch::silu(time1_->forward(temb)));
  auto [ctx, key_mask] = context_for(text, batch, zt.options());

  std::vector<torch::Tensor> skips;
  auto h = conv_in_->forward(zt);
  size_t enc_attn_i = 0;
  for (int64_t l = 0; l < levels; ++l) {
    h = enc_res_[l]->as<ResBlock>()->forward(h, temb);
    if (enc_has_attn_[l]) h = enc_attn_[enc_attn_i++]->as<CrossAttention>()->forward(h, ctx, key_mask);
    if (l == 0 && control.defined()) {
      require_rank4(control, "control");
      if (control.size(0) != batch || control.size(1) != cfg_.control_channels ||
          control.size(2) != h.size(2) || control.size(3) != h.size(3))
        throw DimensionError("control " + shape_str(control) + " does not match injection block " +
                             shape_str(h) + " with " + std::to_string(cfg_.control_channels) +
                             " control channels");
      h = h + cfg_.control_scale * control_proj_->forward(control.to(h.scalar_type()));
    }
    skips.push_back(h);
    if (l + 1 < levels) h = downs_[l]->as<tnn::Conv2d>()->forward(h);
  }
  h = mid1_->forward(h, temb);
  h = mid_attn_->forward(h, ctx, key_mask);
  h = mid2_->forward(h, temb);

  size_t dec_attn_i = 0;
  for (int64_t i = 0; i < levels; ++i) {
    h = torch::cat({h, skips[static_cast<size_t>(levels - 1 - i)]}, 1);
    h = dec_res_[i]->as<ResBlock>()->forward(h, temb);
    if (dec_has_attn_[i]) h = dec_attn_[dec_attn_i++]->as<CrossAttention>()->forward(h, ctx, key_mask);
    if (i + 1 < levels) {
      h = torch::upsample_nearest2d(h, {h.size(2) * 2, h.size(3) * 2});
      h = ups_[i]->as<tnn::Conv2d>()->forward(h);
    }
  }
  return out_conv_->forward(torch::silu(out_norm_->forward(h)));
}

}  // namespace ctcig::nn
