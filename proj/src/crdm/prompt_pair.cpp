#include "ctcig/crdm/prompt_pair.hpp"

#include "ctcig/errors.hpp"

namespace ctcig::crdm {

std::string to_string(DialogueMode m) {
  return m == DialogueMode::camouflage ? "camouflage" : "non_camouflage";
}

std::string to_string(OutlinePolicy p) {
  switch (p) {
    case OutlinePolicy::silent: return "silent";
    case OutlinePolicy::mentioned: return "mentioned";
    case OutlinePolicy::none: return "none";
  }
  return "none";
}

DialogueMode parse_dialogue_mode(const std::string& s) {
  if (s == "camouflage") return DialogueMode::camouflage;
  if (s == "non_camouflage" || s == "non-camouflage") return DialogueMode::non_camouflage;
  throw ConfigError("mode", "unknown dialogue mode '" + s + "'");
}

OutlinePolicy parse_outline_policy(const std::string& s) {
  if (s == "silent") return OutlinePolicy::silent;
  if (s == "mentioned") return OutlinePolicy::mentioned;
  if (s == "none") return OutlinePolicy::none;
  throw ConfigError("policy", "unknown outline policy '" + s + "'");
}

nlohmann::json to_json(const PromptPair& p) {
  return {{"t_detail", p.t_detail},
          {"t_simple", p.t_simple},
          {"source_image", p.source_image},
          {"mode", to_string(p.mode)},
          {"outline_policy", to_string(p.outline_policy)},
          {"vlm_id", p.vlm_id}};
}

PromptPair prompt_pair_from_json(const nlohmann::json& j) {
  PromptPair p;
  try {
    p.t_detail = j.at("t_detail").get<std::string>();
    p.t_simple = j.at("t_simple").get<std::string>();
    p.source_image = j.value("source_image", "");
    p.mode = parse_dialogue_mode(j.value("mode", "camouflage"));
    p.outline_policy = parse_outline_policy(j.value("outline_policy", "silent"));
    p.vlm_id = j.value("vlm_id", "");
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("malformed prompt record: ") + e.what());
  }
  return p;
}

}  // namespace ctcig::crdm
