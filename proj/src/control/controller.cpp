#include "ctcig/control/controller.hpp"

namespace ctcig::control {

namespace nn = torch::nn;

ControlResBlockImpl::ControlResBlockImpl(int64_t in, int64_t out, int64_t stride) {
  conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1)));
  conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1)));
  skip_ = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride)));
}

torch::Tensor ControlResBlockImpl::forward(const torch::Tensor& x) {
  auto h = conv2_->forward(torch::silu(conv1_->forward(x)));
  return torch::silu(h + skip_->forward(x));
}

MaskControllerImpl::MaskControllerImpl(ControllerConfig cfg) : cfg_(cfg) {
  int strided = 0;
  for (int64_t f = cfg_.downsample; f > 1; f /= 2) {
    if (f % 2) throw ConfigError("controller.downsample", "must be a power of two");
    ++strided;
  }
  if (cfg_.downsample < 1 || strided > 3)
    throw ConfigError("controller.downsample", "must be 1, 2, 4 or 8");
  const auto& w = cfg_.widths;
  b1_ = register_module("block1", ControlResBlock(1, w[0], strided > 0 ? 2 : 1));
  b2_ = register_module("block2", ControlResBlock(w[0], w[1], strided > 1 ? 2 : 1));
  b3_ = register_module("block3", ControlResBlock(w[1], w[2], strided > 2 ? 2 : 1));
}

void validate_binary_mask(const torch::Tensor& mask) {
  auto bad = torch::logical_and(mask != 0, mask != 1).sum().item<int64_t>();
  if (bad > 0)
    throw ValidationError("mask is not binary: " + std::to_string(bad) + " pixel(s) outside {0,1}");
}

ControlFeature MaskControllerImpl::encode_mask(const torch::Tensor& mask) {
  require_rank4(mask, "mask");
  if (mask.size(1) != 1) throw DimensionError("mask must have a single channel, got " + shape_str(mask));
  validate_binary_mask(mask);
  auto h = b3_->forward(b2_->forward(b1_->forward(mask)));
  return {h, ControlStage::raw};
}

}  // namespace ctcig::control
