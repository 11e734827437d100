#include "ctcig/crdm/templates.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crdm_templates_v1.inc"
#include "ctcig/errors.hpp"

namespace ctcig::crdm {

DialogueTemplates DialogueTemplates::from_json_text(const std::string& text) {
  DialogueTemplates t;
  try {
    const auto j = nlohmann::json::parse(text);
    t.version = j.at("version");
    const auto& s = j.at("system");
    t.sys_perception = s.at("perception");
    t.sys_concise = s.at("concise");
    t.sys_outline_notice = s.at("outline_notice");
    t.sys_outline_prohibition = s.at("outline_prohibition");
    const auto& q = j.at("questions");
    t.q1 = q.at("q1");
    t.q2_camouflage = q.at("q2_camouflage");
    t.q2_non_camouflage = q.at("q2_non_camouflage");
    t.q3 = q.at("q3");
    t.q4 = q.at("q4");
    t.fix_lexicon = j.at("corrections").at("lexicon");
    t.fix_single_sentence = j.at("corrections").at("single_sentence");
    t.banned_lexicon = j.at("banned_lexicon").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("templates", e.what());
  }
  return t;
}

DialogueTemplates DialogueTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("templates", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

const DialogueTemplates& DialogueTemplates::builtin() {
  static const DialogueTemplates t = from_json_text(kCrdmTemplatesV1);
  return t;
}

}  // namespace ctcig::crdm
