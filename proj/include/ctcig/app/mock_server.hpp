#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace ctcig::app {

/// Local HTTP stand-in for a vision-language endpoint: POST
/// /v1/chat/completions answers with the deterministic mock VLM and POST
/// /v1/embeddings with tiny_fixed image embeddings (PNG data URLs) or
/// pooled text embeddings (plain strings). Every request body is kept.
class MockVlmServer {
 public:
  explicit MockVlmServer(uint64_t seed = 0);
  ~MockVlmServer();
  MockVlmServer(const MockVlmServer&) = delete;
  MockVlmServer& operator=(const MockVlmServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  void start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;

  std::vector<nlohmann::json> chat_requests() const;
  /// The next `n` chat requests get HTTP `status` instead of a reply.
  void fail_next(int n, int status = 503);

 private:
  void install_routes();

  uint64_t seed_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::string host_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> chat_requests_;
  int fail_remaining_ = 0;
  int fail_status_ = 503;
};

}  // namespace ctcig::app
