#pragma once

#include <string>

#include <json.hpp>

namespace ctcig::crdm {

enum class DialogueMode { camouflage, non_camouflage };
enum class OutlinePolicy { silent, mentioned, none };

std::string to_string(DialogueMode m);
std::string to_string(OutlinePolicy p);
DialogueMode parse_dialogue_mode(const std::string& s);
OutlinePolicy parse_outline_policy(const std::string& s);

/// Detailed (training) and one-sentence (inference) prompts for one image.
struct PromptPair {
  std::string t_detail;
  std::string t_simple;
  std::string source_image;
  DialogueMode mode = DialogueMode::camouflage;
  OutlinePolicy outline_policy = OutlinePolicy::silent;
  std::string vlm_id;

  bool operator==(const PromptPair&) const = default;
};

nlohmann::json to_json(const PromptPair& p);
PromptPair prompt_pair_from_json(const nlohmann::json& j);

}  // namespace ctcig::crdm
