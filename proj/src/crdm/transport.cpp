#include "ctcig/crdm/transport.hpp"

#include <sodium.h>

#include <httplib.h>

#include "ctcig/errors.hpp"

namespace ctcig::crdm {

namespace {
constexpr const char* kDataUrlPrefix = "data:image/png;base64,";
}

std::string base64_encode(const std::string& bytes) {
  const size_t len = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);  // drop the terminating NUL
  return out;
}

std::string base64_decode(const std::string& text) {
  std::string out(text.size() / 4 * 3 + 3, '\0');
  size_t n = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(), text.size(),
                        nullptr, &n, nullptr, sodium_base64_VARIANT_ORIGINAL) != 0)
    throw ProtocolError("invalid base64 payload");
  out.resize(n);
  return out;
}

nlohmann::json to_wire(const ChatRequest& req) {
  auto messages = nlohmann::json::array();
  for (const auto& m : req.messages) {
    auto content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", m.text}});
    if (m.image_png)
      content.push_back(
          {{"type", "image_url"}, {"image_url", {{"url", kDataUrlPrefix + base64_encode(*m.image_png)}}}});
    messages.push_back({{"role", m.role}, {"content", content}});
  }
  return {{"model", req.model}, {"messages", messages}, {"temperature", req.temperature}};
}

ChatRequest chat_request_from_wire(const nlohmann::json& body) {
  ChatRequest r;
  try {
    r.model = body.value("model", "");
    r.temperature = body.value("temperature", 0.0);
    for (const auto& m : body.at("messages")) {
      ChatMessage msg;
      msg.role = m.at("role");
      const auto& content = m.at("content");
      if (content.is_string()) {
        msg.text = content.get<std::string>();
      } else {
        for (const auto& part : content) {
          const auto type = part.at("type").get<std::string>();
          if (type == "text") {
            msg.text += part.at("text").get<std::string>();
          } else if (type == "image_url") {
            std::string url = part.at("image_url").at("url");
            const std::string prefix = kDataUrlPrefix;
            if (url.rfind(prefix, 0) != 0) throw ProtocolError("image_url is not a base64 PNG data URL");
            msg.image_png = base64_decode(url.substr(prefix.size()));
          }
        }
      }
      r.messages.push_back(std::move(msg));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed chat request: ") + e.what());
  }
  return r;
}

std::string reply_text_from_wire(const nlohmann::json& body) {
  try {
    const auto& content = body.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    std::string out;
    for (const auto& part : content)
      if (part.value("type", "") == "text") out += part.at("text").get<std::string>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed chat reply: ") + e.what());
  }
}

nlohmann::json reply_to_wire(const std::string& model, const std::string& text) {
  return {{"object", "chat.completion"},
          {"model", model},
          {"choices",
           {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}, {"finish_reason", "stop"}}}}};
}

void VlmEndpoint::validate() const {
  if (max_retries < 0) throw ConfigError("max_retries", "must be >= 0");
  if (temperature < 0.0) throw ConfigError("temperature", "must be >= 0");
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
    throw ConfigError("base_url", "must start with http:// or https://");
}

std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url", "missing scheme in '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

HttpChatTransport::HttpChatTransport(VlmEndpoint ep) : ep_(std::move(ep)) { ep_.validate(); }

std::string HttpChatTransport::complete(const ChatRequest& req) {
  const auto [host, prefix] = split_base_url(ep_.base_url);
  httplib::Client cli(host);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep_.timeout);
  cli.set_connection_timeout(secs.count(), 0);
  cli.set_read_timeout(secs.count(), 0);
  cli.set_write_timeout(secs.count(), 0);
  auto res = cli.Post(prefix + "/chat/completions", to_wire(req).dump(), "application/json");
  if (!res) throw TransportFailure("request failed: " + httplib::to_string(res.error()));
  if (res->status >= 500) throw TransportFailure("server returned " + std::to_string(res->status));
  if (res->status != 200)
    throw ProtocolError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("reply is not JSON: ") + e.what());
  }
  return reply_text_from_wire(body);
}

std::string ScriptedTransport::complete(const ChatRequest& req) {
  requests_.push_back(req);
  if (fail_first > 0) {
    --fail_first;
    throw TransportFailure("scripted failure");
  }
  if (replies_.empty()) throw TransportFailure("script exhausted");
  auto r = std::move(replies_.front());
  replies_.pop_front();
  return r;
}

}  // namespace ctcig::crdm
