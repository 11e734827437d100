#include <gtest/gtest.h>

#include "ctcig/app/mock_server.hpp"
#include "ctcig/crdm/dialogue.hpp"
#include "ctcig/crdm/mock_vlm.hpp"
#include "ctcig/crdm/outline.hpp"
#include "ctcig/data/synth.hpp"

using namespace ctcig;
using namespace ctcig::crdm;

namespace {

image::BinaryImage square(int64_t size, int64_t x0, int64_t y0, int64_t side) {
  image::BinaryImage m(size, size);
  for (int64_t y = y0; y < y0 + side; ++y)
    for (int64_t x = x0; x < x0 + side; ++x) m.at(x, y) = 1;
  return m;
}

image::RgbImage gray(int64_t size, uint8_t v) {
  image::RgbImage img(size, size);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

const std::vector<std::string> kCleanReplies = {
    "A brown flounder with speckled skin lies flat.",
    "It sits on sand that shares its speckles.",
    "A speckled brown flounder lying flat on matching speckled sand, nearly invisible.",
    "A flounder hides on speckled sand.",
};

DialogueTranscript scripted_dialogue(std::vector<std::string> replies, OutlinePolicy policy) {
  ScriptedTransport t(std::move(replies));
  return run_dialogue(gray(8, 100), DialogueMode::camouflage, t, policy);
}

std::string image_parts(const nlohmann::json& body) {
  int n = 0;
  for (const auto& m : body.at("messages"))
    for (const auto& part : m.at("content"))
      if (part.at("type") == "image_url") ++n;
  return std::to_string(n);
}

}  // namespace

TEST(Morphology, SquareElementByHand) {
  image::BinaryImage m(5, 5);
  m.at(2, 2) = 1;
  auto d = dilate(m, 1);
  for (int64_t y = 0; y < 5; ++y)
    for (int64_t x = 0; x < 5; ++x)
      EXPECT_EQ(d.at(x, y), (std::abs(x - 2) <= 1 && std::abs(y - 2) <= 1) ? 1 : 0) << x << "," << y;
  EXPECT_EQ(erode(d, 1).area(), 1);
  EXPECT_EQ(erode(d, 1).at(2, 2), 1);
}

TEST(Morphology, BorderCountsAsBackground) {
  image::BinaryImage full(4, 4);
  std::fill(full.bits.begin(), full.bits.end(), 1);
  auto e = erode(full, 1);
  EXPECT_EQ(e.area(), 4);
  EXPECT_EQ(e.at(1, 1), 1);
  EXPECT_EQ(e.at(0, 0), 0);
}

TEST(Outline, BandIsGradientOfMask) {
  auto m = square(20, 6, 6, 8);
  auto band = outline_band(m, 2);
  // dilate(8x8 square, 2) = 12x12, erode = 4x4.
  EXPECT_EQ(band.area(), 12 * 12 - 4 * 4);
  EXPECT_EQ(band.at(10, 10), 0);
  EXPECT_EQ(band.at(4, 4), 1);
  EXPECT_EQ(band.at(3, 3), 0);
}

TEST(Outline, OnlyBandPixelsChange) {
  auto s = data::synth_sample(data::SynthConfig{}, 3).sample;
  auto out = annotate_outline(s.image, s.mask, 2, 0.6, 77);
  auto band = outline_band(s.mask, 2);
  int64_t changed_outside = 0;
  for (int64_t y = 0; y < s.image.height; ++y)
    for (int64_t x = 0; x < s.image.width; ++x)
      for (int c = 0; c < 3; ++c)
        if (!band.at(x, y) && out.at(x, y, c) != s.image.at(x, y, c)) ++changed_outside;
  EXPECT_EQ(changed_outside, 0);
  EXPECT_NE(out, s.image);
}

TEST(Outline, BlendByHandAndOpaque) {
  auto img = gray(12, 100);
  auto m = square(12, 4, 4, 4);
  const auto col = outline_color(9);
  auto half = annotate_outline(img, m, 1, 0.5, 9);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(half.at(3, 3, c), std::lround(50.0 + 0.5 * col[static_cast<size_t>(c)]));
  auto opaque = annotate_outline(img, m, 1, 1.0, 9);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(opaque.at(3, 3, c), col[static_cast<size_t>(c)]);
}

TEST(Outline, ColorIsSaturated) {
  for (uint64_t s = 0; s < 200; ++s) {
    auto c = outline_color(s);
    EXPECT_EQ(*std::max_element(c.begin(), c.end()), 255);
    EXPECT_EQ(*std::min_element(c.begin(), c.end()), 0);
  }
}

TEST(Outline, RejectsBadInputs) {
  auto img = gray(8, 0);
  EXPECT_THROW(annotate_outline(img, image::BinaryImage(8, 8), 1, 0.5, 0), ValidationError);
  EXPECT_THROW(annotate_outline(img, square(8, 1, 1, 3), 1, 0.0, 0), ValidationError);
  EXPECT_THROW(annotate_outline(img, square(8, 1, 1, 3), 0, 0.5, 0), ValidationError);
  EXPECT_THROW(annotate_outline(img, square(9, 1, 1, 3), 1, 0.5, 0), ValidationError);
}

TEST(Dialogue, SystemMessagesPerPolicy) {
  const auto& tpl = DialogueTemplates::builtin();
  auto silent = system_messages_for(OutlinePolicy::silent, tpl);
  auto mentioned = system_messages_for(OutlinePolicy::mentioned, tpl);
  auto none = system_messages_for(OutlinePolicy::none, tpl);
  auto has = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  EXPECT_TRUE(has(silent, tpl.sys_outline_prohibition));
  EXPECT_TRUE(has(silent, tpl.sys_outline_notice));
  EXPECT_FALSE(has(mentioned, tpl.sys_outline_prohibition));
  EXPECT_TRUE(has(mentioned, tpl.sys_outline_notice));
  EXPECT_FALSE(has(none, tpl.sys_outline_notice));
  for (const auto* v : {&silent, &mentioned, &none}) {
    EXPECT_TRUE(has(*v, tpl.sys_perception));
    EXPECT_TRUE(has(*v, tpl.sys_concise));
  }
}

TEST(Dialogue, QuestionsPerMode) {
  const auto& tpl = DialogueTemplates::builtin();
  for (auto mode : {DialogueMode::camouflage, DialogueMode::non_camouflage}) {
    auto q = questions_for(mode, tpl);
    ASSERT_EQ(q.size(), 4u);
    std::string lower = q[1];
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    EXPECT_EQ(lower.find("imagine") != std::string::npos, mode == DialogueMode::non_camouflage);
  }
}

TEST(Dialogue, FourTurnsImageOnlyFirst) {
  ScriptedTransport t(kCleanReplies);
  auto tr = run_dialogue(gray(8, 10), DialogueMode::camouflage, t, OutlinePolicy::silent);
  ASSERT_EQ(tr.turns.size(), 8u);
  for (size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(tr.turns[i].role, i % 2 ? "assistant" : "user");
    EXPECT_EQ(tr.turns[i].image_png.has_value(), i == 0);
  }
  ASSERT_EQ(t.requests().size(), 4u);
  EXPECT_EQ(t.requests()[3].messages.size(), tr.system_messages.size() + 7);
  EXPECT_EQ(tr.assistant_replies(), kCleanReplies);
}

TEST(Dialogue, RetriesThenSucceeds) {
  ScriptedTransport t(kCleanReplies);
  t.fail_first = 2;
  DialogueOptions o;
  o.max_retries = 2;
  EXPECT_NO_THROW(run_dialogue(gray(8, 10), DialogueMode::camouflage, t, OutlinePolicy::silent, o));
}

TEST(Dialogue, ExhaustedRetriesNameTurn) {
  ScriptedTransport t(kCleanReplies);
  t.fail_first = 3;
  DialogueOptions o;
  o.max_retries = 2;
  try {
    run_dialogue(gray(8, 10), DialogueMode::camouflage, t, OutlinePolicy::silent, o);
    FAIL();
  } catch (const EndpointError& e) {
    EXPECT_EQ(e.turn(), 1);
  }
}

TEST(Dialogue, EmptyReplyIsProtocolError) {
  EXPECT_THROW(scripted_dialogue({"ok.", "  \n ", "x", "y."}, OutlinePolicy::silent), ProtocolError);
}

TEST(Lexicon, WholeWordsAndPlurals) {
  const auto& lex = DialogueTemplates::builtin().banned_lexicon;
  EXPECT_EQ(banned_words_in("The Outlines were MARKED; contour.", lex),
            (std::vector<std::string>{"contour", "marked", "outline"}));
  EXPECT_TRUE(banned_words_in("an unmarked path, outlier", lex).empty());
}

TEST(Lexicon, SingleSentence) {
  EXPECT_TRUE(is_single_sentence("  A crab hides.  "));
  EXPECT_FALSE(is_single_sentence("A crab hides. It waits."));
  EXPECT_FALSE(is_single_sentence("A crab hides"));
  EXPECT_FALSE(is_single_sentence("Does it hide?"));
  EXPECT_EQ(normalize_whitespace("  a \n\t b  "), "a b");
}

TEST(ExtractPrompts, CleanTranscript) {
  auto tr = scripted_dialogue(kCleanReplies, OutlinePolicy::silent);
  auto p = extract_prompts(tr, nullptr);
  EXPECT_EQ(p.t_detail, kCleanReplies[2]);
  EXPECT_EQ(p.t_simple, kCleanReplies[3]);
  EXPECT_EQ(p.outline_policy, OutlinePolicy::silent);
  EXPECT_EQ(p.vlm_id, "scripted");
}

TEST(ExtractPrompts, LexiconReaskRepairs) {
  auto replies = kCleanReplies;
  replies[2] = "A flounder with a highlighted outline on sand.";
  auto tr = scripted_dialogue(replies, OutlinePolicy::silent);
  ScriptedTransport fix({"A speckled flounder on sand.", "A flounder hides on sand."});
  auto p = extract_prompts(tr, &fix);
  EXPECT_EQ(tr.corrections, 1);
  EXPECT_EQ(p.t_detail, "A speckled flounder on sand.");
  ASSERT_EQ(fix.requests().size(), 2u);
  EXPECT_NE(fix.requests()[0].messages.back().text.find("highlighted, outline"), std::string::npos);
}

TEST(ExtractPrompts, PersistentViolationCarriesWords) {
  auto replies = kCleanReplies;
  replies[3] = "A marked flounder on sand.";
  auto tr = scripted_dialogue(replies, OutlinePolicy::silent);
  ScriptedTransport fix({"Fine detail.", "Still a marked flounder."});
  try {
    extract_prompts(tr, &fix);
    FAIL();
  } catch (const LexiconViolationError& e) {
    EXPECT_EQ(e.words(), (std::vector<std::string>{"marked"}));
  }
  auto tr2 = scripted_dialogue(replies, OutlinePolicy::silent);
  EXPECT_THROW(extract_prompts(tr2, nullptr), LexiconViolationError);
}

TEST(ExtractPrompts, LexiconIgnoredUnlessSilent) {
  auto replies = kCleanReplies;
  replies[2] = "A flounder with a highlighted outline on sand.";
  auto tr = scripted_dialogue(replies, OutlinePolicy::mentioned);
  EXPECT_EQ(extract_prompts(tr, nullptr).t_detail, replies[2]);
}

TEST(ExtractPrompts, MultiSentenceReasksSummaryOnly) {
  auto replies = kCleanReplies;
  replies[3] = "A flounder hides. It is flat.";
  auto tr = scripted_dialogue(replies, OutlinePolicy::silent);
  ScriptedTransport fix({"A flat flounder hides on sand."});
  auto p = extract_prompts(tr, &fix);
  EXPECT_EQ(p.t_simple, "A flat flounder hides on sand.");
  EXPECT_EQ(p.t_detail, kCleanReplies[2]);
  EXPECT_EQ(fix.requests().size(), 1u);

  auto tr2 = scripted_dialogue(replies, OutlinePolicy::silent);
  ScriptedTransport bad({"Two. Sentences."});
  EXPECT_THROW(extract_prompts(tr2, &bad), ProtocolError);
}

TEST(ExtractPrompts, IncompleteTranscript) {
  DialogueTranscript tr;
  EXPECT_THROW(extract_prompts(tr, nullptr), ProtocolError);
}

TEST(MockVlm, SilentPolicyCorpusIsClean) {
  const auto& lex = DialogueTemplates::builtin().banned_lexicon;
  MockVlmTransport vlm(4);
  data::SynthConfig cfg;
  cfg.seed = 99;
  for (int64_t i = 0; i < 50; ++i) {
    auto s = data::synth_sample(cfg, i).sample;
    auto annotated = annotate_outline(s.image, s.mask, 2, 0.6, static_cast<uint64_t>(i));
    auto mode = i % 2 ? DialogueMode::non_camouflage : DialogueMode::camouflage;
    auto tr = run_dialogue(annotated, mode, vlm, OutlinePolicy::silent);
    auto p = extract_prompts(tr, &vlm);
    EXPECT_TRUE(banned_words_in(p.t_detail + " " + p.t_simple, lex).empty()) << i;
    EXPECT_TRUE(is_single_sentence(p.t_simple)) << i;
  }
}

TEST(MockVlm, MentionsOutlineWhenAllowed) {
  const auto& lex = DialogueTemplates::builtin().banned_lexicon;
  MockVlmTransport vlm(4);
  auto s = data::synth_sample(data::SynthConfig{}, 0).sample;
  auto annotated = annotate_outline(s.image, s.mask, 2, 0.6, 1);
  auto tr = run_dialogue(annotated, DialogueMode::camouflage, vlm, OutlinePolicy::mentioned);
  auto p = extract_prompts(tr, &vlm);
  EXPECT_FALSE(banned_words_in(p.t_detail + " " + p.t_simple, lex).empty());
}

TEST(MockVlm, PureFunctionOfInputs) {
  MockVlmTransport a(7), b(7);
  auto s = data::synth_sample(data::SynthConfig{}, 1).sample;
  auto ta = run_dialogue(s.image, DialogueMode::camouflage, a, OutlinePolicy::none);
  auto tb = run_dialogue(s.image, DialogueMode::camouflage, b, OutlinePolicy::none);
  EXPECT_EQ(ta.assistant_replies(), tb.assistant_replies());
}

TEST(Wire, RoundTripAndBase64) {
  EXPECT_EQ(base64_encode("foob"), "Zm9vYg==");
  EXPECT_EQ(base64_decode("Zm9vYmFy"), "foobar");
  ChatRequest r{"m", {{"system", "s", std::nullopt}, {"user", "q", std::string("\x89PNG", 4)}}, 0.3};
  auto back = chat_request_from_wire(to_wire(r));
  EXPECT_EQ(back.model, "m");
  ASSERT_EQ(back.messages.size(), 2u);
  EXPECT_EQ(back.messages[1].image_png, r.messages[1].image_png);
  EXPECT_EQ(reply_text_from_wire(reply_to_wire("m", "hi")), "hi");
}

TEST(Wire, HttpDialogueAgainstMockServer) {
  app::MockVlmServer server(3);
  server.start();
  VlmEndpoint ep;
  ep.base_url = server.base_url();
  ep.model_name = "wire-test";
  HttpChatTransport http(ep);
  auto s = data::synth_sample(data::SynthConfig{}, 2).sample;
  auto tr = run_dialogue(annotate_outline(s.image, s.mask, 2, 0.6, 5), DialogueMode::camouflage, http,
                         OutlinePolicy::silent);
  auto reqs = server.chat_requests();
  ASSERT_EQ(reqs.size(), 4u);
  const auto& tpl = DialogueTemplates::builtin();
  for (const auto& body : reqs) {
    EXPECT_EQ(body.at("model"), "wire-test");
    const auto& msgs = body.at("messages");
    for (size_t i = 0; i < tr.system_messages.size(); ++i) EXPECT_EQ(msgs[i].at("role"), "system");
    EXPECT_EQ(image_parts(body), "1");
  }
  bool prohibition = false;
  for (const auto& m : reqs[0].at("messages"))
    for (const auto& part : m.at("content"))
      if (part.at("type") == "text" && part.at("text") == tpl.sys_outline_prohibition) prohibition = true;
  EXPECT_TRUE(prohibition);
  server.stop();
}

TEST(Wire, ServerFailuresAndRetries) {
  app::MockVlmServer server(3);
  server.start();
  VlmEndpoint ep;
  ep.base_url = server.base_url();
  HttpChatTransport http(ep);
  DialogueOptions o;
  o.max_retries = 2;
  server.fail_next(2);
  EXPECT_NO_THROW(run_dialogue(gray(16, 90), DialogueMode::camouflage, http, OutlinePolicy::none, o));
  server.fail_next(3);
  EXPECT_THROW(run_dialogue(gray(16, 90), DialogueMode::camouflage, http, OutlinePolicy::none, o), EndpointError);
  server.stop();
  VlmEndpoint dead = ep;
  dead.timeout = std::chrono::milliseconds(500);
  HttpChatTransport closed(dead);
  o.max_retries = 0;
  EXPECT_THROW(run_dialogue(gray(16, 90), DialogueMode::camouflage, closed, OutlinePolicy::none, o), EndpointError);
}

TEST(Templates, BuiltinVersionAndValidation) {
  EXPECT_EQ(DialogueTemplates::builtin().version, "crdm-templates/1");
  EXPECT_ANY_THROW(DialogueTemplates::from_json_text("{\"version\": 1}"));
}
