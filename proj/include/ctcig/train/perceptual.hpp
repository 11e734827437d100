#pragma once

#include <vector>

#include <json.hpp>

#include "ctcig/tensor.hpp"

namespace ctcig::train {

struct PerceptualConfig {
  std::vector<int64_t> layer_ids{0, 1, 2};
  std::vector<double> gammas{1.0, 1.0, 1.0};
  void validate() const;
};

nlohmann::json to_json(const PerceptualConfig& c);
PerceptualConfig perceptual_config_from_json(const nlohmann::json& j);

/// sum_l 1/(h_l w_l) sum_{h,w} ||gamma_l (f'_l - f_l)||^2 for per-layer
/// feature maps (B,C,h,w), averaged over the batch.
torch::Tensor perceptual_distance(const std::vector<torch::Tensor>& f_pred, const std::vector<torch::Tensor>& f_ref,
                                  const std::vector<double>& gammas);

/// Features come from the frozen tiny_fixed pyramid; inputs are images in
/// [-1,1] of identical shape.
torch::Tensor lpips_loss(const torch::Tensor& x_pred, const torch::Tensor& x_ref, const PerceptualConfig& cfg = {});

}  // namespace ctcig::train
