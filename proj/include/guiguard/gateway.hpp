#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "guiguard/model_client.hpp"
#include "guiguard/protector.hpp"

namespace guiguard {

struct GatewayConfig {
  std::optional<ProtectionPolicy> default_policy;
  std::chrono::seconds session_ttl{3600};
  std::size_t max_image_bytes = 16u << 20;
  std::string bearer_token;  // empty: no auth
  RecognitionStrategy detect_mode = RecognitionStrategy::kJoint;
  std::ostream* access_log = nullptr;
  std::function<std::chrono::steady_clock::time_point()> clock = std::chrono::steady_clock::now;
};

// True for loopback hosts and scripted endpoints.
bool is_local_endpoint(std::string_view base_url);

// Detect-then-protect service. Raw images reach only the detector, and only
// on /v1/detect or sanitize with "detect": true.
class Gateway {
 public:
  struct Response {
    int status = 200;
    nlohmann::json body;
  };

  Gateway(GatewayConfig config, std::optional<ModelClient> detector);

  // Routes: POST /v1/detect, POST /v1/sanitize, GET|DELETE /v1/memory/{id}.
  Response handle(std::string_view method, std::string_view path, std::string_view body,
                  std::string_view authorization = {});

  std::size_t session_count();

 private:
  struct Session {
    std::string id;
    ReplacementMemory memory;
    std::optional<ProtectionPolicy> policy;
    std::chrono::steady_clock::time_point created;
    std::chrono::steady_clock::time_point last_used;
    long requests = 0;
    std::mutex mutex;

    explicit Session(std::string session_id) : id(session_id), memory(std::move(session_id)) {}
  };

  Response detect(const nlohmann::json& body);
  Response sanitize(const nlohmann::json& body);
  Response memory_get(const std::string& id);
  Response memory_delete(const std::string& id);
  std::shared_ptr<Session> find_session(const std::string& id, bool create);
  void expire_sessions();
  void log_access(std::string_view method, std::string_view path, int status,
                  std::size_t bytes_in, const std::string& session);

  GatewayConfig config_;
  std::optional<ModelClient> detector_;
  std::mutex sessions_mutex_;
  std::mutex log_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// Binds a Gateway to cpp-httplib.
class GatewayServer {
 public:
  explicit GatewayServer(Gateway& gateway);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  // Returns the bound port (port 0 picks any free port), or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();
  void wait_until_ready();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace guiguard
