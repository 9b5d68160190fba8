#include "guiguard/model_client.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "guiguard/codec.hpp"
#include "guiguard/error.hpp"

namespace guiguard {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::string_view kScriptScheme = "script:";

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string data_url(const ChatImage& img) {
  return "data:" + img.mime + ";base64," + codec::base64_encode(img.bytes);
}

// Text parts and decoded image bytes of a wire request, in message order.
void walk_wire(const json& wire, std::string& texts, std::vector<std::string>& image_hashes) {
  if (!wire.contains("messages")) return;
  for (const auto& m : wire["messages"]) {
    const auto& content = m.value("content", json());
    if (content.is_string()) {
      texts += content.get<std::string>();
      texts += '\n';
      continue;
    }
    if (!content.is_array()) continue;
    for (const auto& part : content) {
      const auto type = part.value("type", "");
      if (type == "text") {
        texts += part.value("text", "");
        texts += '\n';
      } else if (type == "image_url") {
        const std::string url = part["image_url"].value("url", "");
        const auto comma = url.find(',');
        if (comma == std::string::npos) continue;
        if (auto bytes = codec::base64_decode(std::string_view(url).substr(comma + 1))) {
          image_hashes.push_back(codec::sha256_hex(*bytes));
        }
      }
    }
  }
}

bool rule_matches(const json& rule, const std::string& texts, const std::vector<std::string>& hashes) {
  if (rule.contains("contains")) {
    const auto& c = rule["contains"];
    std::vector<std::string> needles;
    if (c.is_string()) {
      needles.push_back(c.get<std::string>());
    } else {
      needles = c.get<std::vector<std::string>>();
    }
    for (const auto& n : needles) {
      if (texts.find(n) == std::string::npos) return false;
    }
  }
  if (rule.contains("image_sha256")) {
    const auto want = rule["image_sha256"].get<std::string>();
    if (std::find(hashes.begin(), hashes.end(), want) == hashes.end()) return false;
  }
  return true;
}

}  // namespace

std::string EndpointConfig::api_key_env() const {
  std::string out = "GUIGUARD_API_KEY_";
  for (unsigned char c : name) out += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
  return out;
}

void EndpointConfig::validate() const {
  auto bad = [&](const std::string& what) {
    throw Error(ErrorCode::kConfigError, "endpoint '" + name + "': " + what);
  };
  if (base_url.empty()) bad("base_url is required");
  if (!starts_with(base_url, "http://") && !starts_with(base_url, "https://") &&
      !starts_with(base_url, kScriptScheme)) {
    bad("base_url must start with http://, https:// or script:");
  }
  if (max_retries < 0) bad("max_retries must be >= 0");
  if (max_parallel < 1 || max_parallel > 1024) bad("max_parallel must be in [1, 1024]");
  if (!(timeout_s > 0)) bad("timeout_s must be > 0");
  if (backoff_initial_ms < 0) bad("backoff_initial_ms must be >= 0");
  if (!(backoff_factor >= 1.0)) bad("backoff_factor must be >= 1");
  if (!extra.is_object()) bad("extra must be an object");
}

EndpointConfig endpoint_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::kConfigError, "endpoint must be a JSON object");
  for (const char* secret : {"api_key", "key", "token"}) {
    if (j.contains(secret)) {
      throw Error(ErrorCode::kConfigError,
                  std::string("endpoint field '") + secret + "' is not allowed; use GUIGUARD_API_KEY_<NAME>");
    }
  }
  EndpointConfig e;
  try {
    e.name = j.value("name", e.name);
    e.base_url = j.value("base_url", e.base_url);
    e.model = j.value("model", e.model);
    e.timeout_s = j.value("timeout_s", e.timeout_s);
    e.max_retries = j.value("max_retries", e.max_retries);
    e.backoff_initial_ms = j.value("backoff_initial_ms", e.backoff_initial_ms);
    e.backoff_factor = j.value("backoff_factor", e.backoff_factor);
    e.max_parallel = j.value("max_parallel", e.max_parallel);
    e.temperature = j.value("temperature", e.temperature);
    if (j.contains("extra")) e.extra = j["extra"];
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kConfigError, std::string("endpoint: ") + ex.what());
  }
  if (starts_with(e.base_url, kScriptScheme)) {
    std::filesystem::path p = e.base_url.substr(kScriptScheme.size());
    if (p.is_relative()) p = base_dir / p;
    e.base_url = std::string(kScriptScheme) + p.lexically_normal().string();
  }
  e.validate();
  return e;
}

json endpoint_to_json(const EndpointConfig& e) {
  return {{"name", e.name},
          {"base_url", e.base_url},
          {"model", e.model},
          {"timeout_s", e.timeout_s},
          {"max_retries", e.max_retries},
          {"backoff_initial_ms", e.backoff_initial_ms},
          {"backoff_factor", e.backoff_factor},
          {"max_parallel", e.max_parallel},
          {"temperature", e.temperature},
          {"extra", e.extra}};
}

json build_wire_request(const EndpointConfig& endpoint, const ChatRequest& request) {
  if (request.messages.empty()) throw Error(ErrorCode::kInvalidArgument, "chat request has no messages");
  json messages = json::array();
  for (const auto& m : request.messages) {
    if (!m.images.empty() && m.role != "user") {
      throw Error(ErrorCode::kInvalidArgument, "images are only allowed on user messages");
    }
    json content = json::array();
    if (!m.text.empty() || m.images.empty()) content.push_back({{"type", "text"}, {"text", m.text}});
    for (const auto& img : m.images) {
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(img)}}}});
    }
    messages.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  json body = {{"model", endpoint.model},
               {"messages", std::move(messages)},
               {"temperature", endpoint.temperature},
               {"stream", false}};
  body.merge_patch(endpoint.extra);
  return body;
}

ChatResponse parse_wire_response(std::string_view body) {
  auto bad = [](const std::string& what) { return Error(ErrorCode::kMalformedResponse, what); };
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw bad("response is not JSON");
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw bad("response has no choices");
  }
  const auto& msg = j["choices"][0].value("message", json());
  if (!msg.is_object() || !msg.contains("content")) throw bad("choice has no message content");
  ChatResponse r;
  const auto& content = msg["content"];
  if (content.is_string()) {
    r.text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", "") == "text") r.text += part.value("text", "");
    }
  } else if (!content.is_null()) {
    throw bad("message content is neither text nor parts");
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    r.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    r.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  return r;
}

std::string request_hash(const json& wire) { return codec::sha256_hex(wire.dump()); }

std::string request_text_hash(const ChatRequest& request) {
  std::string acc;
  for (const auto& m : request.messages) {
    acc += m.role;
    acc += '\0';
    acc += m.text;
    acc += '\0';
  }
  return codec::sha256_hex(acc);
}

HttpReply chat_reply(std::string_view content, int status) {
  json body = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}},
               {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}}};
  return {status, body.dump(), {}};
}

HttpTransport::HttpTransport(std::string base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::kConfigError, "invalid base_url '" + base_url + "'");
  const auto path_start = base_url.find('/', scheme_end + 3);
  origin_ = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/chat/completions";
}

HttpReply HttpTransport::post(const std::string& body,
                              const std::vector<std::pair<std::string, std::string>>& headers,
                              double timeout_s) {
  httplib::Client cli(origin_);
  const auto t = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_s));
  cli.set_connection_timeout(t);
  cli.set_read_timeout(t);
  cli.set_write_timeout(t);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = cli.Post(path_, h, body, "application/json");
  if (!res) return {0, {}, httplib::to_string(res.error())};
  return {res->status, res->body, {}};
}

ScriptedTransport::ScriptedTransport(json script) : script_(std::move(script)) {
  if (!script_.is_object()) throw Error(ErrorCode::kConfigError, "script must be a JSON object");
  if (script_.contains("rules") && !script_["rules"].is_array()) {
    throw Error(ErrorCode::kConfigError, "script 'rules' must be an array");
  }
}

std::shared_ptr<ScriptedTransport> ScriptedTransport::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open script " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kConfigError, "script " + path.string() + " is not valid JSON");
  return std::make_shared<ScriptedTransport>(std::move(j));
}

HttpReply ScriptedTransport::post(const std::string& body,
                                  const std::vector<std::pair<std::string, std::string>>&, double) {
  const json wire = json::parse(body, nullptr, false);
  if (wire.is_discarded()) return {400, R"({"error":"bad json"})", {}};
  std::string texts;
  std::vector<std::string> hashes;
  walk_wire(wire, texts, hashes);
  for (const auto& rule : script_.value("rules", json::array())) {
    if (!rule_matches(rule, texts, hashes)) continue;
    const int status = rule.value("status", 200);
    return chat_reply(rule.value("reply", ""), status);
  }
  return chat_reply(script_.value("default", ""));
}

HttpReply FunctionTransport::post(const std::string& body,
                                  const std::vector<std::pair<std::string, std::string>>&, double) {
  return handler_(json::parse(body));
}

std::shared_ptr<Transport> make_transport(const EndpointConfig& endpoint) {
  if (starts_with(endpoint.base_url, kScriptScheme)) {
    return ScriptedTransport::from_file(endpoint.base_url.substr(kScriptScheme.size()));
  }
  return std::make_shared<HttpTransport>(endpoint.base_url);
}

ModelClient::ModelClient(EndpointConfig endpoint, std::shared_ptr<Transport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {
  endpoint_.validate();
  if (!transport_) transport_ = make_transport(endpoint_);
  slots_ = std::make_shared<std::counting_semaphore<1024>>(endpoint_.max_parallel);
}

ChatResponse ModelClient::complete(const ChatRequest& request) const {
  const std::string body = build_wire_request(endpoint_, request).dump();
  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv(endpoint_.api_key_env().c_str()); key && *key) {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  const auto start = Clock::now();
  double delay_ms = endpoint_.backoff_initial_ms;
  HttpReply reply;
  for (int attempt = 1;; ++attempt) {
    slots_->acquire();
    try {
      reply = transport_->post(body, headers, endpoint_.timeout_s);
    } catch (...) {
      slots_->release();
      throw;
    }
    slots_->release();

    if (reply.status >= 200 && reply.status < 300) {
      ChatResponse r = parse_wire_response(reply.body);
      r.attempts = attempt;
      r.latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      return r;
    }
    const std::string where = "endpoint '" + endpoint_.name + "'";
    if (reply.status == 401 || reply.status == 403) {
      throw Error(ErrorCode::kAuthFailure, where + " rejected credentials (HTTP " +
                                               std::to_string(reply.status) + ")");
    }
    const bool transient = reply.status == 0 || reply.status == 429 || reply.status >= 500;
    const std::string detail = reply.status == 0 ? reply.error : "HTTP " + std::to_string(reply.status);
    if (!transient) {
      throw Error(ErrorCode::kTransportFailure, where + ": " + detail);
    }
    if (attempt > endpoint_.max_retries) {
      const std::string msg = where + ": " + detail + " after " + std::to_string(attempt) + " attempts";
      throw Error(reply.status == 429 ? ErrorCode::kRateLimited : ErrorCode::kTransportFailure, msg);
    }
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
    delay_ms *= endpoint_.backoff_factor;
  }
}

std::string_view strategy_name(RecognitionStrategy s) {
  return s == RecognitionStrategy::kJoint ? "joint" : "decomposed";
}

std::optional<RecognitionStrategy> parse_strategy(std::string_view s) {
  if (s == "joint") return RecognitionStrategy::kJoint;
  if (s == "decomposed") return RecognitionStrategy::kDecomposed;
  return std::nullopt;
}

namespace {

std::string ask(const ModelClient& client, const std::string& prompt, const ChatImage* image,
                std::vector<std::string>* prompt_hashes) {
  ChatRequest req;
  ChatMessage msg{"user", prompt, {}};
  if (image) msg.images.push_back(*image);
  req.messages.push_back(std::move(msg));
  if (prompt_hashes) prompt_hashes->push_back(request_hash(build_wire_request(client.endpoint(), req)));
  return client.complete(req).text;
}

void append_errors(std::vector<protocol::ParseError>& to, std::vector<protocol::ParseError> from,
                   std::string_view stage) {
  for (auto& e : from) {
    e.reason = std::string(stage) + ": " + e.reason;
    to.push_back(std::move(e));
  }
}

protocol::RecognitionOutput recognize_decomposed(const ModelClient& client, const ChatImage& image,
                                                 std::string_view goal, std::string_view ctx,
                                                 std::vector<std::string>* hashes) {
  using protocol::RecognitionMode;
  protocol::RecognitionOutput out;

  auto extract = protocol::parse_extraction_output(
      ask(client, protocol::build_recognition_prompt(goal, ctx, RecognitionMode::kDecomposedExtract),
          &image, hashes));
  append_errors(out.parse_errors, std::move(extract.parse_errors), "stage 1");
  auto& items = extract.items;
  if (items.empty()) return out;

  auto risks = protocol::parse_risk_output(ask(
      client, protocol::build_recognition_prompt(goal, ctx, RecognitionMode::kDecomposedRisk, items),
      &image, hashes));
  append_errors(out.parse_errors, std::move(risks.parse_errors), "stage 2");
  for (const auto& r : risks.risks) {
    if (r.item < 1 || r.item > static_cast<int>(items.size())) {
      out.inconsistencies.push_back({"#" + std::to_string(r.item), "stage 2 labelled an unknown item"});
      continue;
    }
    auto& it = items[r.item - 1];
    if (it.risk) {
      if (*it.risk != r.risk) out.inconsistencies.push_back({it.text, "stage 2 labelled the item twice"});
      continue;
    }
    it.risk = r.risk;
  }

  std::vector<protocol::StageItem> risky;
  std::vector<std::size_t> risky_src;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].risk) {
      out.inconsistencies.push_back({items[i].text, "extracted at stage 1 but given no risk at stage 2"});
      out.none_items.push_back({items[i].text, items[i].bbox, RiskLevel::kNone, std::nullopt,
                                Necessity::kNotNecessary});
    } else if (*items[i].risk == RiskLevel::kNone) {
      out.none_items.push_back({items[i].text, items[i].bbox, RiskLevel::kNone, std::nullopt,
                                Necessity::kNotNecessary});
    } else {
      risky.push_back(items[i]);
      risky_src.push_back(i);
    }
  }
  if (risky.empty()) return out;

  auto labels = protocol::parse_category_output(ask(
      client, protocol::build_recognition_prompt(goal, ctx, RecognitionMode::kDecomposedCategory, risky),
      &image, hashes));
  append_errors(out.parse_errors, std::move(labels.parse_errors), "stage 3");
  std::vector<std::optional<protocol::IndexedLabel>> assigned(risky.size());
  for (const auto& l : labels.labels) {
    if (l.item < 1 || l.item > static_cast<int>(risky.size())) {
      out.inconsistencies.push_back({"#" + std::to_string(l.item), "stage 3 labelled an unknown item"});
      continue;
    }
    auto& slot = assigned[l.item - 1];
    if (slot) {
      out.inconsistencies.push_back({risky[l.item - 1].text, "stage 3 labelled the item twice"});
      continue;
    }
    slot = l;
  }
  for (std::size_t k = 0; k < risky.size(); ++k) {
    PrivacyElement e{risky[k].text, risky[k].bbox, *risky[k].risk, std::nullopt, Necessity::kNotNecessary};
    if (assigned[k]) {
      e.category = assigned[k]->category;
      e.necessity = assigned[k]->necessity;
    } else {
      e.category = PrivacyCategory::kUnresolved;
      out.inconsistencies.push_back(
          {e.text, "labelled " + std::string(risk_name(e.risk)) + " at stage 2 but dropped at stage 3"});
    }
    out.elements.push_back(std::move(e));
  }
  return out;
}

}  // namespace

protocol::RecognitionOutput recognize(const ModelClient& client, const ChatImage& screenshot,
                                      std::string_view goal, std::string_view response_ctx,
                                      RecognitionStrategy strategy,
                                      std::vector<std::string>* prompt_hashes) {
  if (strategy == RecognitionStrategy::kDecomposed) {
    return recognize_decomposed(client, screenshot, goal, response_ctx, prompt_hashes);
  }
  const auto prompt =
      protocol::build_recognition_prompt(goal, response_ctx, protocol::RecognitionMode::kJoint);
  return protocol::parse_recognition_output(ask(client, prompt, &screenshot, prompt_hashes));
}

protocol::JudgeVerdict judge(const ModelClient& client, std::string_view goal,
                             std::string_view baseline_plan, std::string_view protected_plan) {
  ChatRequest req;
  req.messages.push_back({"user", protocol::build_judge_prompt(goal, baseline_plan, protected_plan), {}});
  std::string first = client.complete(req).text;
  try {
    return protocol::parse_judge_score(first);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnparseableVerdict) throw;
  }
  req.messages.push_back({"assistant", first, {}});
  req.messages.push_back(
      {"user", "Your reply did not end with a valid score line. Reply again and finish with exactly one line "
               "of the form SCORE: <n>, where n is an integer from 0 to 4.", {}});
  return protocol::parse_judge_score(client.complete(req).text);
}

}  // namespace guiguard
