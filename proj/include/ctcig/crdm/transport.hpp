#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ctcig::crdm {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string text;
  /// Raw PNG bytes; sent as a base64 data URL.
  std::optional<std::string> image_png;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.2;
};

/// Chat-completions request body: every message carries a content array of
/// {"type":"text"} and optional {"type":"image_url"} parts.
nlohmann::json to_wire(const ChatRequest& req);
/// Inverse of to_wire (used by the mock server).
ChatRequest chat_request_from_wire(const nlohmann::json& body);
/// choices[0].message.content as plain text.
std::string reply_text_from_wire(const nlohmann::json& body);
nlohmann::json reply_to_wire(const std::string& model, const std::string& text);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

/// Recoverable transport failure (connection refused, timeout, 5xx).
class TransportFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// Returns the assistant reply text or throws TransportFailure.
  virtual std::string complete(const ChatRequest& req) = 0;
  virtual std::string model_id() const = 0;
};

struct VlmEndpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string model_name = "qwen2.5-vl";
  double temperature = 0.2;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;

  void validate() const;
};

/// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& url);

/// POSTs to {base_url}/chat/completions.
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(VlmEndpoint ep);
  std::string complete(const ChatRequest& req) override;
  std::string model_id() const override { return ep_.model_name; }

 private:
  VlmEndpoint ep_;
};

/// Replays canned replies in order; records every request.
class ScriptedTransport : public ChatTransport {
 public:
  explicit ScriptedTransport(std::vector<std::string> replies, std::string model = "scripted")
      : replies_(replies.begin(), replies.end()), model_(std::move(model)) {}
  std::string complete(const ChatRequest& req) override;
  std::string model_id() const override { return model_; }
  const std::vector<ChatRequest>& requests() const { return requests_; }
  /// Number of leading calls that throw TransportFailure.
  int fail_first = 0;

 private:
  std::deque<std::string> replies_;
  std::string model_;
  std::vector<ChatRequest> requests_;
};

}  // namespace ctcig::crdm
