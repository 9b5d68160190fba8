#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "guiguard/protocol.hpp"

namespace guiguard {

struct EndpointConfig {
  std::string name = "default";
  // "http(s)://host[:port][/prefix]" (POSTs to <prefix>/chat/completions) or
  // "script:<file.json>" for an offline scripted endpoint.
  std::string base_url;
  std::string model;
  double timeout_s = 120.0;
  int max_retries = 3;
  int backoff_initial_ms = 1000;
  double backoff_factor = 2.0;
  int max_parallel = 4;
  double temperature = 0.0;
  nlohmann::json extra = nlohmann::json::object();  // merged into the request body

  // GUIGUARD_API_KEY_<NAME>, NAME upper-cased with non-alphanumerics as '_'.
  std::string api_key_env() const;
  // Throws Error{kConfigError}.
  void validate() const;
};

// Relative script paths are resolved against `base_dir`.
EndpointConfig endpoint_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json endpoint_to_json(const EndpointConfig& e);  // never includes keys

struct ChatImage {
  std::string mime = "image/png";
  std::vector<std::uint8_t> bytes;
};

struct ChatMessage {
  std::string role;
  std::string text;
  std::vector<ChatImage> images;  // user messages only
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
};

struct ChatResponse {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  double latency_ms = 0.0;
  int attempts = 0;
  int retries() const { return attempts > 0 ? attempts - 1 : 0; }
};

// Chat-completion JSON body: {"model", "messages":[{"role","content":[parts]}], ...}.
nlohmann::json build_wire_request(const EndpointConfig& endpoint, const ChatRequest& request);
// Throws Error{kMalformedResponse}.
ChatResponse parse_wire_response(std::string_view body);

// SHA-256 over the wire body, and over the text parts only.
std::string request_hash(const nlohmann::json& wire);
std::string request_text_hash(const ChatRequest& request);

struct HttpReply {
  int status = 0;  // 0: connection failure or timeout
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>& headers,
                         double timeout_s) = 0;
};

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string base_url);
  HttpReply post(const std::string& body,
                 const std::vector<std::pair<std::string, std::string>>& headers,
                 double timeout_s) override;

 private:
  std::string origin_;
  std::string path_;
};

// Rule-based offline endpoint. Script:
//   {"rules": [{"contains": "...", "image_sha256": "...", "reply": "..."}],
//    "default": "..."}
// Rules match against the concatenated message texts and decoded image
// hashes; the first rule whose given conditions all hold wins.
class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(nlohmann::json script);
  static std::shared_ptr<ScriptedTransport> from_file(const std::filesystem::path& path);

  HttpReply post(const std::string& body,
                 const std::vector<std::pair<std::string, std::string>>& headers,
                 double timeout_s) override;

 private:
  nlohmann::json script_;
};

// Adapts a callable that sees the parsed wire request.
class FunctionTransport final : public Transport {
 public:
  using Handler = std::function<HttpReply(const nlohmann::json& request)>;
  explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}
  HttpReply post(const std::string& body,
                 const std::vector<std::pair<std::string, std::string>>& headers,
                 double timeout_s) override;

 private:
  Handler handler_;
};

HttpReply chat_reply(std::string_view content, int status = 200);

std::shared_ptr<Transport> make_transport(const EndpointConfig& endpoint);

// Retrying, concurrency-capped chat client. Copies share the same cap.
class ModelClient {
 public:
  explicit ModelClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport = nullptr);

  const EndpointConfig& endpoint() const { return endpoint_; }

  // Retries HTTP 429, 5xx and timeouts with exponential backoff. Throws
  // Error{kAuthFailure | kTransportFailure | kRateLimited | kMalformedResponse}.
  ChatResponse complete(const ChatRequest& request) const;

 private:
  EndpointConfig endpoint_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<std::counting_semaphore<1024>> slots_;
};

enum class RecognitionStrategy { kJoint, kDecomposed };

std::string_view strategy_name(RecognitionStrategy s);
std::optional<RecognitionStrategy> parse_strategy(std::string_view s);

// Joint: one call with the full prompt + image. Decomposed: extraction,
// risk, and category calls with stage outputs threaded; stage-1 items are
// kept even if later stages drop them, with an inconsistency flag.
protocol::RecognitionOutput recognize(const ModelClient& client, const ChatImage& screenshot,
                                      std::string_view goal, std::string_view response_ctx,
                                      RecognitionStrategy strategy,
                                      std::vector<std::string>* prompt_hashes = nullptr);

// Re-asks once on an unparseable verdict. Throws Error{kUnparseableVerdict}.
protocol::JudgeVerdict judge(const ModelClient& client, std::string_view goal,
                             std::string_view baseline_plan, std::string_view protected_plan);

}  // namespace guiguard
