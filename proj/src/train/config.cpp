#include "ctcig/train/config.hpp"

#include <set>

namespace ctcig::train {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0)) throw ConfigError(field, std::string(field) + " must be > 0");
  };
  positive(lr_controller_firm, "lr_controller_firm");
  positive(lr_projectors, "lr_projectors");
  positive(lr_backbone, "lr_backbone");
  positive(control_scale, "control_scale");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "weight_decay must be >= 0");
  if (!(lambda_lpips >= 0.0)) throw ConfigError("lambda_lpips", "lambda_lpips must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size", "batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs", "epochs must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps", "max_steps must be >= 0");
  if (T < 2) throw ConfigError("T", "T must be >= 2");
  if (base_channels < 8 || base_channels % 8 != 0)
    throw ConfigError("base_channels", "base_channels must be a positive multiple of 8");
  perceptual.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr_controller_firm", c.lr_controller_firm},
          {"lr_projectors", c.lr_projectors},
          {"lr_backbone", c.lr_backbone},
          {"weight_decay", c.weight_decay},
          {"lambda_lpips", c.lambda_lpips},
          {"batch_size", c.batch_size},
          {"control_scale", c.control_scale},
          {"epochs", c.epochs},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"codec", to_string(c.codec)},
          {"policy", nn::to_string(c.policy)},
          {"T", c.T},
          {"schedule", diffusion::to_string(c.schedule)},
          {"base_channels", c.base_channels},
          {"perceptual", to_json(c.perceptual)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train", "training config must be a JSON object");
  static const std::set<std::string> known = {
      "lr_controller_firm", "lr_projectors", "lr_backbone", "weight_decay", "lambda_lpips", "batch_size",
      "control_scale", "epochs", "max_steps", "seed", "codec", "policy", "T", "schedule", "base_channels",
      "perceptual"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError(k, "unknown training config key '" + k + "'");

  TrainConfig c;
  auto get = [&j](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(out);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(key, std::string("bad value for '") + key + "': " + e.what());
    }
  };
  get("lr_controller_firm", c.lr_controller_firm);
  get("lr_projectors", c.lr_projectors);
  get("lr_backbone", c.lr_backbone);
  get("weight_decay", c.weight_decay);
  get("lambda_lpips", c.lambda_lpips);
  get("batch_size", c.batch_size);
  get("control_scale", c.control_scale);
  get("epochs", c.epochs);
  get("max_steps", c.max_steps);
  get("seed", c.seed);
  get("T", c.T);
  get("base_channels", c.base_channels);
  if (j.contains("codec")) c.codec = parse_codec(j.at("codec").get<std::string>());
  if (j.contains("policy")) c.policy = nn::parse_param_policy(j.at("policy").get<std::string>());
  if (j.contains("schedule")) c.schedule = diffusion::parse_schedule_kind(j.at("schedule").get<std::string>());
  if (j.contains("perceptual")) c.perceptual = perceptual_config_from_json(j.at("perceptual"));
  c.validate();
  return c;
}

nn::ModelConfig model_config_for(const TrainConfig& c) {
  auto m = nn::ModelConfig::for_latent(latent_channels(c.codec), downsample_factor(c.codec));
  m.denoiser.control_scale = c.control_scale;
  m.denoiser.base_channels = c.base_channels;
  return m;
}

}  // namespace ctcig::train
