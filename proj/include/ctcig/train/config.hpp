#pragma once

#include <cstdint>

#include <json.hpp>

#include "ctcig/diffusion/schedule.hpp"
#include "ctcig/nn/model.hpp"
#include "ctcig/train/codec.hpp"
#include "ctcig/train/perceptual.hpp"

namespace ctcig::train {

struct TrainConfig {
  double lr_controller_firm = 1e-4;
  double lr_projectors = 5e-6;
  /// Only used by the full policy, for parameters tagged frozen.
  double lr_backbone = 1e-4;
  double weight_decay = 1e-2;
  double lambda_lpips = 1e-3;
  int64_t batch_size = 4;
  double control_scale = 1.2;
  int64_t epochs = 1;
  /// Stop after this many optimizer steps (0 = run all epochs).
  int64_t max_steps = 0;
  uint64_t seed = 0;
  Codec codec = Codec::identity;
  nn::ParamPolicy policy = nn::ParamPolicy::paper_policy;
  int64_t T = 1000;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::linear_beta;
  int64_t base_channels = 64;
  PerceptualConfig perceptual;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Keys absent from `j` keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Model config matching a training config.
nn::ModelConfig model_config_for(const TrainConfig& c);

}  // namespace ctcig::train
