#include "ctcig/crdm/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "ctcig/errors.hpp"

namespace ctcig::crdm {

std::vector<std::string> DialogueTranscript::assistant_replies() const {
  std::vector<std::string> out;
  for (const auto& t : turns)
    if (t.role == "assistant") out.push_back(t.text);
  return out;
}

std::vector<std::string> system_messages_for(OutlinePolicy policy, const DialogueTemplates& tpl) {
  std::vector<std::string> out{tpl.sys_perception, tpl.sys_concise};
  if (policy != OutlinePolicy::none) out.push_back(tpl.sys_outline_notice);
  if (policy == OutlinePolicy::silent) out.push_back(tpl.sys_outline_prohibition);
  return out;
}

std::vector<std::string> questions_for(DialogueMode mode, const DialogueTemplates& tpl) {
  return {tpl.q1, mode == DialogueMode::camouflage ? tpl.q2_camouflage : tpl.q2_non_camouflage, tpl.q3,
          tpl.q4};
}

namespace {

const DialogueTemplates& templates_of(const DialogueOptions& o) {
  return o.templates ? *o.templates : DialogueTemplates::builtin();
}

ChatRequest build_request(const std::vector<std::string>& system, const std::vector<DialogueTurn>& turns,
                          const std::string& model, double temperature) {
  ChatRequest req;
  req.model = model;
  req.temperature = temperature;
  for (const auto& s : system) req.messages.push_back({"system", s, std::nullopt});
  for (const auto& t : turns) req.messages.push_back({t.role, t.text, t.image_png});
  return req;
}

/// Sends the history plus `question`, appends both turns on success.
void ask(std::vector<DialogueTurn>& turns, const std::vector<std::string>& system, DialogueTurn question,
         ChatTransport& transport, const DialogueOptions& opts, int turn_index) {
  turns.push_back(std::move(question));
  const auto req = build_request(system, turns, transport.model_id(), opts.temperature);
  std::string last_error;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    try {
      auto reply = transport.complete(req);
      if (normalize_whitespace(reply).empty())
        throw ProtocolError("empty assistant reply at turn " + std::to_string(turn_index));
      turns.push_back({"assistant", std::move(reply), std::nullopt});
      return;
    } catch (const TransportFailure& e) {
      last_error = e.what();
    }
  }
  throw EndpointError(turn_index, last_error + " (after " + std::to_string(opts.max_retries) + " retries)");
}

}  // namespace

DialogueTranscript run_dialogue(const image::RgbImage& img, DialogueMode mode, ChatTransport& transport,
                                OutlinePolicy policy, const DialogueOptions& opts) {
  const auto& tpl = templates_of(opts);
  DialogueTranscript tr;
  tr.system_messages = system_messages_for(policy, tpl);
  tr.mode = mode;
  tr.policy = policy;
  tr.source_image = opts.source_image;
  tr.vlm_id = transport.model_id();

  const auto questions = questions_for(mode, tpl);
  const std::string png = image::encode_png(img);
  for (size_t i = 0; i < questions.size(); ++i) {
    DialogueTurn q{"user", questions[i], i == 0 ? std::optional<std::string>(png) : std::nullopt};
    ask(tr.turns, tr.system_messages, std::move(q), transport, opts, static_cast<int>(i + 1));
  }
  return tr;
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> banned_words_in(const std::string& text, const std::vector<std::string>& lexicon) {
  std::set<std::string> found;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    for (const auto& b : lexicon)
      if (word == b || word == b + "s") found.insert(b);
    word.clear();
  };
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c)))
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    else
      flush();
  }
  flush();
  return {found.begin(), found.end()};
}

bool is_single_sentence(const std::string& text) {
  const auto t = normalize_whitespace(text);
  if (t.empty() || t.back() != '.') return false;
  return std::count_if(t.begin(), t.end(), [](char c) { return c == '.' || c == '!' || c == '?'; }) == 1;
}

namespace {

std::string join_words(const std::vector<std::string>& w) {
  std::string s;
  for (const auto& x : w) s += (s.empty() ? "" : ", ") + x;
  return s;
}

std::vector<std::string> lexicon_violations(const DialogueTranscript& tr, const std::string& detail,
                                            const std::string& simple, const DialogueTemplates& tpl) {
  if (tr.policy != OutlinePolicy::silent) return {};
  auto a = banned_words_in(detail, tpl.banned_lexicon);
  auto b = banned_words_in(simple, tpl.banned_lexicon);
  std::set<std::string> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  return {all.begin(), all.end()};
}

}  // namespace

PromptPair extract_prompts(DialogueTranscript& tr, ChatTransport* transport, const DialogueOptions& opts) {
  const auto& tpl = templates_of(opts);
  if (tr.turns.size() != 8 || tr.assistant_replies().size() != 4)
    throw ProtocolError("transcript is not complete (need 4 user + 4 assistant turns)");

  auto detail = normalize_whitespace(tr.turns[5].text);
  auto simple = normalize_whitespace(tr.turns[7].text);
  auto banned = lexicon_violations(tr, detail, simple, tpl);
  bool multi = !is_single_sentence(simple);

  if ((!banned.empty() || multi) && transport && tr.corrections == 0) {
    const auto questions = questions_for(tr.mode, tpl);
    std::vector<DialogueTurn> turns(tr.turns.begin(), tr.turns.begin() + (banned.empty() ? 6 : 4));
    if (!banned.empty()) {
      std::string fix = tpl.fix_lexicon;
      if (auto pos = fix.find("{words}"); pos != std::string::npos) fix.replace(pos, 7, join_words(banned));
      ask(turns, tr.system_messages, {"user", fix + " " + questions[2], std::nullopt}, *transport, opts, 3);
      ask(turns, tr.system_messages, {"user", questions[3], std::nullopt}, *transport, opts, 4);
    } else {
      ask(turns, tr.system_messages, {"user", tpl.fix_single_sentence + " " + questions[3], std::nullopt},
          *transport, opts, 4);
    }
    tr.turns = std::move(turns);
    tr.corrections = 1;
    detail = normalize_whitespace(tr.turns[5].text);
    simple = normalize_whitespace(tr.turns[7].text);
    banned = lexicon_violations(tr, detail, simple, tpl);
    multi = !is_single_sentence(simple);
  }
  if (!banned.empty()) throw LexiconViolationError(banned);
  if (multi) throw ProtocolError("summarized prompt is not a single sentence: \"" + simple + "\"");
  if (detail.empty()) throw ProtocolError("detailed prompt is empty");

  PromptPair p;
  p.t_detail = detail;
  p.t_simple = simple;
  p.source_image = tr.source_image;
  p.mode = tr.mode;
  p.outline_policy = tr.policy;
  p.vlm_id = tr.vlm_id;
  return p;
}

}  // namespace ctcig::crdm
