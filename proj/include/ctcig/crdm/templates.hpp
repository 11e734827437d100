#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctcig::crdm {

/// Versioned question/system-message wording for the four-question dialogue.
struct DialogueTemplates {
  std::string version;
  std::string sys_perception;
  std::string sys_concise;
  std::string sys_outline_notice;
  std::string sys_outline_prohibition;
  std::string q1;
  std::string q2_camouflage;
  std::string q2_non_camouflage;
  std::string q3;
  std::string q4;
  std::string fix_lexicon;  // "{words}" is replaced by the offending words
  std::string fix_single_sentence;
  std::vector<std::string> banned_lexicon;

  /// The bundled crdm-templates/1 asset.
  static const DialogueTemplates& builtin();
  static DialogueTemplates from_json_text(const std::string& text);
  static DialogueTemplates load(const std::filesystem::path& path);
};

}  // namespace ctcig::crdm
