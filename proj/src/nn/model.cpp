#include "ctcig/nn/model.hpp"

namespace ctcig::nn {

std::string to_string(ParamGroupTag t) {
  switch (t) {
    case ParamGroupTag::controller_firm: return "controller_firm";
    case ParamGroupTag::cross_attn_projectors: return "cross_attn_projectors";
    case ParamGroupTag::frozen: return "frozen";
  }
  return "frozen";
}

ParamGroupTag parse_param_tag(const std::string& s) {
  if (s == "controller_firm") return ParamGroupTag::controller_firm;
  if (s == "cross_attn_projectors") return ParamGroupTag::cross_attn_projectors;
  if (s == "frozen") return ParamGroupTag::frozen;
  throw LoadError("unknown parameter tag '" + s + "'");
}

ParamPolicy parse_param_policy(const std::string& s) {
  if (s == "paper" || s == "paper_policy") return ParamPolicy::paper_policy;
  if (s == "full") return ParamPolicy::full;
  throw ConfigError("policy", "unknown parameter policy '" + s + "'");
}

std::string to_string(ParamPolicy p) { return p == ParamPolicy::full ? "full" : "paper_policy"; }

ParamGroupTag tag_for(const std::string& name) {
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  if (starts("controller.") || starts("firm.") || starts("denoiser.control_proj."))
    return ParamGroupTag::controller_firm;
  const bool in_attn = name.find("_attn.") != std::string::npos;
  if (in_attn) {
    for (const char* proj : {".to_q.", ".to_k.", ".to_v.", ".to_out."})
      if (name.find(proj) != std::string::npos) return ParamGroupTag::cross_attn_projectors;
  }
  return ParamGroupTag::frozen;
}

ModelConfig ModelConfig::for_latent(int64_t latent_channels, int64_t downsample) {
  ModelConfig c;
  c.denoiser.in_channels = latent_channels;
  c.denoiser.control_channels = latent_channels;
  c.controller.widths[2] = latent_channels;
  c.controller.downsample = downsample;
  c.firm.latent_channels = latent_channels;
  c.firm.control_channels = latent_channels;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  const auto& d = c.denoiser;
  return {
      {"denoiser",
       {{"in_channels", d.in_channels},
        {"base_channels", d.base_channels},
        {"channel_mults", d.channel_mults},
        {"attn_resolutions", d.attn_resolutions},
        {"text_dim", d.text_dim},
        {"time_dim", d.time_dim},
        {"heads", d.heads},
        {"groups", d.groups},
        {"control_channels", d.control_channels},
        {"control_scale", d.control_scale}}},
      {"controller", {{"widths", c.controller.widths}, {"downsample", c.controller.downsample}}},
      {"firm",
       {{"latent_channels", c.firm.latent_channels},
        {"control_channels", c.firm.control_channels},
        {"hidden_channels", c.firm.hidden_channels}}},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, bool strict) {
  ModelConfig c;
  auto get = [strict](const nlohmann::json& obj, const char* key, auto& out) {
    if (obj.contains(key)) {
      obj.at(key).get_to(out);
    } else if (strict) {
      throw ConfigError(key, std::string("missing config key '") + key + "'");
    }
  };
  for (const char* section : {"denoiser", "controller", "firm"})
    if (strict && !j.contains(section))
      throw ConfigError(section, std::string("missing config key '") + section + "'");
  if (j.contains("denoiser")) {
    const auto& d = j.at("denoiser");
    get(d, "in_channels", c.denoiser.in_channels);
    get(d, "base_channels", c.denoiser.base_channels);
    get(d, "channel_mults", c.denoiser.channel_mults);
    get(d, "attn_resolutions", c.denoiser.attn_resolutions);
    get(d, "text_dim", c.denoiser.text_dim);
    get(d, "time_dim", c.denoiser.time_dim);
    get(d, "heads", c.denoiser.heads);
    get(d, "groups", c.denoiser.groups);
    get(d, "control_channels", c.denoiser.control_channels);
    get(d, "control_scale", c.denoiser.control_scale);
  }
  if (j.contains("controller")) {
    get(j.at("controller"), "widths", c.controller.widths);
    get(j.at("controller"), "downsample", c.controller.downsample);
  }
  if (j.contains("firm")) {
    get(j.at("firm"), "latent_channels", c.firm.latent_channels);
    get(j.at("firm"), "control_channels", c.firm.control_channels);
    get(j.at("firm"), "hidden_channels", c.firm.hidden_channels);
  }
  return c;
}

CtcigModelImpl::CtcigModelImpl(ModelConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.controller.widths[2] != cfg_.firm.control_channels ||
      cfg_.firm.control_channels != cfg_.denoiser.control_channels ||
      cfg_.firm.latent_channels != cfg_.denoiser.in_channels)
    throw ConfigError("model", "controller/FIRM/denoiser channel counts are inconsistent");
  if (cfg_.denoiser.control_channels != cfg_.denoiser.in_channels)
    throw ConfigError("control_channels", "cross normalization needs control channels == latent channels");
  controller_ = register_module("controller", control::MaskController(cfg_.controller));
  firm_ = register_module("firm", firm::Firm(cfg_.firm));
  denoiser_ = register_module("denoiser", Denoiser(cfg_.denoiser));
}

FeatureMap CtcigModelImpl::control_signal(const control::ControlFeature& raw, const FeatureMap& zt) {
  return control::cross_normalize(firm_->refine(raw, zt), zt).data;
}

FeatureMap CtcigModelImpl::predict_eps(const FeatureMap& zt, const torch::Tensor& t,
                                       const text::EmbeddingMatrix* text,
                                       const control::ControlFeature* raw_control) {
  FeatureMap control;
  if (raw_control) control = control_signal(*raw_control, zt);
  return denoiser_->forward(zt, t, text, control);
}

std::vector<TaggedParameter> CtcigModelImpl::tagged_parameters() const {
  std::vector<TaggedParameter> out;
  for (const auto& item : named_parameters(/*recurse=*/true))
    out.push_back({item.key(), item.value(), tag_for(item.key())});
  return out;
}

std::vector<TaggedParameter> CtcigModelImpl::trainable_parameters(ParamPolicy policy) const {
  auto all = tagged_parameters();
  if (policy == ParamPolicy::full) return all;
  std::vector<TaggedParameter> out;
  for (auto& p : all)
    if (p.tag != ParamGroupTag::frozen) out.push_back(std::move(p));
  return out;
}

}  // namespace ctcig::nn
