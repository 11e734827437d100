#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctcig/crdm/prompt_pair.hpp"
#include "ctcig/crdm/templates.hpp"
#include "ctcig/crdm/transport.hpp"
#include "ctcig/image/image.hpp"

namespace ctcig::crdm {

struct DialogueTurn {
  std::string role;  // user | assistant
  std::string text;
  std::optional<std::string> image_png;
};

struct DialogueTranscript {
  std::vector<std::string> system_messages;
  std::vector<DialogueTurn> turns;
  DialogueMode mode = DialogueMode::camouflage;
  OutlinePolicy policy = OutlinePolicy::silent;
  std::string source_image;
  std::string vlm_id;
  /// Corrective re-asks performed by extract_prompts.
  int corrections = 0;

  std::vector<std::string> assistant_replies() const;
};

/// System messages for a policy: perception guidance and concision always;
/// the outline notice unless policy is none; the prohibition only for silent.
std::vector<std::string> system_messages_for(OutlinePolicy policy, const DialogueTemplates& tpl);

/// The four questions in order for a mode.
std::vector<std::string> questions_for(DialogueMode mode, const DialogueTemplates& tpl);

struct DialogueOptions {
  int max_retries = 2;
  double temperature = 0.2;
  std::string source_image;
  const DialogueTemplates* templates = nullptr;  // null = builtin
};

/// Runs the four-question protocol. The image travels only with the first
/// user turn. Transport failures are retried max_retries times per turn.
DialogueTranscript run_dialogue(const image::RgbImage& img, DialogueMode mode, ChatTransport& transport,
                                OutlinePolicy policy, const DialogueOptions& opts = {});

/// Banned words present in `text` (case-insensitive, whole words, simple
/// plural included), sorted and unique.
std::vector<std::string> banned_words_in(const std::string& text, const std::vector<std::string>& lexicon);

/// Exactly one sentence terminator in the trimmed text, and it is the final '.'.
bool is_single_sentence(const std::string& text);

/// Trims and collapses internal whitespace runs to single spaces.
std::string normalize_whitespace(const std::string& text);

/// Takes assistant turns 3 and 4 as T_detail / T_simple and validates them.
/// On a violation, re-asks once through `transport` (Q3+Q4 for banned
/// words, Q4 for a multi-sentence summary) and updates `tr`; throws
/// LexiconViolationError / ProtocolError if it persists or no transport is given.
PromptPair extract_prompts(DialogueTranscript& tr, ChatTransport* transport,
                           const DialogueOptions& opts = {});

}  // namespace ctcig::crdm
