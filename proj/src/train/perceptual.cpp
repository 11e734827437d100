#include "ctcig/train/perceptual.hpp"

#include "ctcig/eval/feature_pyramid.hpp"

namespace ctcig::train {

void PerceptualConfig::validate() const {
  if (layer_ids.size() != gammas.size())
    throw ConfigError("gammas", "expected one gamma per layer (" + std::to_string(layer_ids.size()) + "), got " +
                                    std::to_string(gammas.size()));
  for (auto id : layer_ids)
    if (id < 0 || id >= eval::TinyFeaturePyramid::kLevels)
      throw ConfigError("layer_ids", "layer id " + std::to_string(id) + " out of range");
  for (auto g : gammas)
    if (!(g >= 0.0)) throw ConfigError("gammas", "gammas must be >= 0");
}

nlohmann::json to_json(const PerceptualConfig& c) { return {{"layer_ids", c.layer_ids}, {"gammas", c.gammas}}; }

PerceptualConfig perceptual_config_from_json(const nlohmann::json& j) {
  PerceptualConfig c;
  if (j.contains("layer_ids")) c.layer_ids = j.at("layer_ids").get<std::vector<int64_t>>();
  if (j.contains("gammas")) c.gammas = j.at("gammas").get<std::vector<double>>();
  c.validate();
  return c;
}

torch::Tensor perceptual_distance(const std::vector<torch::Tensor>& f_pred, const std::vector<torch::Tensor>& f_ref,
                                  const std::vector<double>& gammas) {
  if (f_pred.size() != f_ref.size() || f_pred.size() != gammas.size())
    throw DimensionError("feature stacks and gammas differ in length");
  torch::Tensor total;
  for (size_t l = 0; l < f_pred.size(); ++l) {
    require_same_shape(f_pred[l], f_ref[l], "perceptual features");
    const double hw = static_cast<double>(f_pred[l].size(2) * f_pred[l].size(3));
    auto term = (gammas[l] * (f_pred[l] - f_ref[l])).pow(2).sum({1, 2, 3}).mean() / hw;
    total = total.defined() ? total + term : term;
  }
  return total;
}

torch::Tensor lpips_loss(const torch::Tensor& x_pred, const torch::Tensor& x_ref, const PerceptualConfig& cfg) {
  cfg.validate();
  require_same_shape(x_pred, x_ref, "lpips inputs");
  const auto& pyramid = eval::TinyFeaturePyramid::shared();
  const auto fp = pyramid.features(x_pred);
  std::vector<torch::Tensor> fr;
  {
    torch::NoGradGuard ng;
    fr = pyramid.features(x_ref);
  }
  std::vector<torch::Tensor> sp, sr;
  for (auto id : cfg.layer_ids) {
    sp.push_back(fp[static_cast<size_t>(id)]);
    sr.push_back(fr[static_cast<size_t>(id)]);
  }
  return perceptual_distance(sp, sr, cfg.gammas);
}

}  // namespace ctcig::train
