#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ctcig/control/controller.hpp"
#include "ctcig/control/cross_norm.hpp"
#include "ctcig/firm/firm.hpp"
#include "ctcig/nn/denoiser.hpp"

namespace ctcig::nn {

enum class ParamGroupTag { controller_firm, cross_attn_projectors, frozen };
enum class ParamPolicy { paper_policy, full };

std::string to_string(ParamGroupTag t);
ParamGroupTag parse_param_tag(const std::string& s);
ParamPolicy parse_param_policy(const std::string& s);
std::string to_string(ParamPolicy p);

struct TaggedParameter {
  std::string name;
  torch::Tensor tensor;
  ParamGroupTag tag;
};

/// Tag from the fully qualified parameter name: controller.*, firm.* and
/// the UNet control projection are controller_firm; to_q/to_k/to_v/to_out
/// inside a cross-attention block are cross_attn_projectors; all else frozen.
ParamGroupTag tag_for(const std::string& name);

struct ModelConfig {
  DenoiserConfig denoiser;
  control::ControllerConfig controller;
  firm::FirmConfig firm;

  /// Consistent config for a latent with `latent_channels` channels at
  /// 1/`downsample` of the image resolution.
  static ModelConfig for_latent(int64_t latent_channels, int64_t downsample);
};

nlohmann::json to_json(const ModelConfig& c);
/// With `strict`, every key must be present.
ModelConfig model_config_from_json(const nlohmann::json& j, bool strict = false);

/// Mask controller + FIRM + denoiser, wired as
/// eps = denoise(z_t, t, c, CN(FIRM(controller(mask), z_t), z_t)).
class CtcigModelImpl : public torch::nn::Module {
 public:
  explicit CtcigModelImpl(ModelConfig cfg = {});
  const ModelConfig& config() const { return cfg_; }

  control::MaskController& controller() { return controller_; }
  firm::Firm& firm() { return firm_; }
  Denoiser& denoiser() { return denoiser_; }

  /// Cross-normalized control signal for the injection point.
  FeatureMap control_signal(const control::ControlFeature& raw, const FeatureMap& zt);

  /// Full eps prediction. `raw_control` may be null (no mask).
  FeatureMap predict_eps(const FeatureMap& zt, const torch::Tensor& t,
                         const text::EmbeddingMatrix* text, const control::ControlFeature* raw_control);

  std::vector<TaggedParameter> tagged_parameters() const;
  /// paper_policy: controller_firm + cross_attn_projectors; full: everything.
  std::vector<TaggedParameter> trainable_parameters(ParamPolicy policy) const;

 private:
  ModelConfig cfg_;
  control::MaskController controller_{nullptr};
  firm::Firm firm_{nullptr};
  Denoiser denoiser_{nullptr};
};
TORCH_MODULE(CtcigModel);

}  // namespace ctcig::nn
