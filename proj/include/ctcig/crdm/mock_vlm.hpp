#pragma once

#include <cstdint>
#include <string>

#include "ctcig/crdm/templates.hpp"
#include "ctcig/crdm/transport.hpp"

namespace ctcig::crdm {

/// Deterministic stand-in for a vision-language model. Replies are a pure
/// function of (image bytes, questions asked, system messages, seed): it
/// reads the image's dominant color and texture, follows the camouflage or
/// imagined-scenery branch from the second question, and, like a real VLM
/// shown an annotated image, talks about the outline unless a system
/// message forbids it.
std::string mock_vlm_reply(const ChatRequest& req, uint64_t seed,
                           const DialogueTemplates& tpl = DialogueTemplates::builtin());

class MockVlmTransport : public ChatTransport {
 public:
  explicit MockVlmTransport(uint64_t seed = 0, std::string model = "mock-vlm")
      : seed_(seed), model_(std::move(model)) {}
  std::string complete(const ChatRequest& req) override { return mock_vlm_reply(req, seed_); }
  std::string model_id() const override { return model_; }

 private:
  uint64_t seed_;
  std::string model_;
};

}  // namespace ctcig::crdm
