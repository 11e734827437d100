#include "ctcig/app/mock_server.hpp"

#include "ctcig/crdm/mock_vlm.hpp"
#include "ctcig/errors.hpp"
#include "ctcig/eval/embed.hpp"
#include "ctcig/image/image.hpp"

// After Eigen: <resolv.h> defines a _res macro that collides with Eigen parameter names.
#include <httplib.h>

namespace ctcig::app {

namespace {

void reply_error(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", {{"message", msg}}}}.dump(), "application/json");
}

}  // namespace

MockVlmServer::MockVlmServer(uint64_t seed) : seed_(seed), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

MockVlmServer::~MockVlmServer() { stop(); }

void MockVlmServer::install_routes() {
  server_->Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      return reply_error(res, 400, e.what());
    }
    {
      std::lock_guard lock(mu_);
      chat_requests_.push_back(body);
      if (fail_remaining_ > 0) {
        --fail_remaining_;
        return reply_error(res, fail_status_, "injected failure");
      }
    }
    try {
      const auto chat = crdm::chat_request_from_wire(body);
      const auto text = crdm::mock_vlm_reply(chat, seed_);
      res.set_content(crdm::reply_to_wire(chat.model, text).dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });

  server_->Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto body = nlohmann::json::parse(req.body);
      const auto inputs = body.at("input").get<std::vector<std::string>>();
      const auto model = body.value("model", std::string("mock-embed"));
      eval::EmbeddingProvider local;
      std::vector<std::vector<double>> rows;
      const std::string prefix = eval::kPngDataUrlPrefix;
      for (size_t i = 0; i < inputs.size(); ++i) {
        const std::string id = std::to_string(i);
        eval::EmbeddingSet set;
        if (inputs[i].rfind(prefix, 0) == 0) {
          const auto img = image::decode_png(crdm::base64_decode(inputs[i].substr(prefix.size())));
          set = eval::embed_image_list({img}, {id}, local, 1);
        } else {
          set = eval::embed_texts({inputs[i]}, {id}, local);
        }
        rows.emplace_back(set.vectors.row(0).begin(), set.vectors.row(0).end());
      }
      res.set_content(eval::embeddings_reply(model, rows).dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });
}

void MockVlmServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error("mock server could not bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockVlmServer::run(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) throw Error("mock server could not listen on " + host + ":" + std::to_string(port));
}

void MockVlmServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockVlmServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_) + "/v1"; }

std::vector<nlohmann::json> MockVlmServer::chat_requests() const {
  std::lock_guard lock(mu_);
  return chat_requests_;
}

void MockVlmServer::fail_next(int n, int status) {
  std::lock_guard lock(mu_);
  fail_remaining_ = n;
  fail_status_ = status;
}

}  // namespace ctcig::app
