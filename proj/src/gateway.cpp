#include "guiguard/gateway.hpp"

#include <random>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "guiguard/codec.hpp"
#include "guiguard/dataset.hpp"
#include "guiguard/error.hpp"
#include "guiguard/image.hpp"

namespace guiguard {
namespace {

using json = nlohmann::json;

Gateway::Response error_response(int status, std::string message, json extra = json::object()) {
  extra["error"] = std::move(message);
  return {status, std::move(extra)};
}

struct BadRequest {
  int status;
  std::string message;
};

std::vector<std::uint8_t> decode_image_field(const json& body, std::size_t cap) {
  if (!body.contains("image") || !body["image"].is_string()) throw BadRequest{400, "field 'image' (base64) is required"};
  const auto& b64 = body["image"].get_ref<const std::string&>();
  if (b64.size() / 4 * 3 > cap + 2) throw BadRequest{413, "image exceeds " + std::to_string(cap) + " bytes"};
  auto bytes = codec::base64_decode(b64);
  if (!bytes) throw BadRequest{400, "field 'image' is not valid base64"};
  if (bytes->size() > cap) throw BadRequest{413, "image exceeds " + std::to_string(cap) + " bytes"};
  if (bytes->empty()) throw BadRequest{400, "field 'image' is empty"};
  return std::move(*bytes);
}

std::string string_field(const json& body, const char* key) {
  if (!body.contains(key)) return {};
  if (!body[key].is_string()) throw BadRequest{400, std::string("field '") + key + "' must be a string"};
  return body[key].get<std::string>();
}

json output_to_json(const protocol::RecognitionOutput& out) {
  json elements = json::array(), none = json::array(), errors = json::array(), flags = json::array();
  for (const auto& e : out.elements) elements.push_back(element_to_json(e));
  for (const auto& e : out.none_items) none.push_back(element_to_json(e));
  for (const auto& e : out.parse_errors) {
    errors.push_back({{"line", e.line_number}, {"raw", e.raw_line}, {"reason", e.reason}});
  }
  for (const auto& i : out.inconsistencies) flags.push_back({{"text", i.text}, {"reason", i.reason}});
  return {{"elements", std::move(elements)},
          {"none_items", std::move(none)},
          {"parse_errors", std::move(errors)},
          {"inconsistencies", std::move(flags)}};
}

std::string fresh_session_id() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

}  // namespace

bool is_local_endpoint(std::string_view url) {
  if (url.substr(0, 7) == "script:") return true;
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) return false;
  std::string_view host = url.substr(scheme + 3);
  host = host.substr(0, host.find('/'));
  if (!host.empty() && host.front() == '[') {
    host = host.substr(1, host.find(']') - 1);
  } else {
    host = host.substr(0, host.find(':'));
  }
  return host == "localhost" || host == "::1" || host.substr(0, 4) == "127.";
}

Gateway::Gateway(GatewayConfig config, std::optional<ModelClient> detector)
    : config_(std::move(config)), detector_(std::move(detector)) {}

std::size_t Gateway::session_count() {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

void Gateway::expire_sessions() {
  const auto now = config_.clock();
  std::lock_guard lock(sessions_mutex_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
    const bool idle = session_lock.owns_lock() && now - it->second->last_used > config_.session_ttl;
    session_lock = {};
    it = idle ? sessions_.erase(it) : std::next(it);
  }
}

std::shared_ptr<Gateway::Session> Gateway::find_session(const std::string& id, bool create) {
  std::lock_guard lock(sessions_mutex_);
  if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  if (!create) return nullptr;
  auto s = std::make_shared<Session>(id);
  s->created = s->last_used = config_.clock();
  sessions_.emplace(id, s);
  return s;
}

void Gateway::log_access(std::string_view method, std::string_view path, int status, std::size_t bytes_in,
                         const std::string& session) {
  if (!config_.access_log) return;
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch()).count();
  json line = {{"ts_ms", ms}, {"method", method}, {"path", path}, {"status", status}, {"bytes_in", bytes_in}};
  if (!session.empty()) line["session"] = session;
  std::lock_guard lock(log_mutex_);
  *config_.access_log << line.dump() << "\n" << std::flush;
}

Gateway::Response Gateway::handle(std::string_view method, std::string_view path, std::string_view body,
                                  std::string_view authorization) {
  expire_sessions();
  std::string session_for_log;
  Response resp;
  [&] {
    if (!config_.bearer_token.empty() && authorization != "Bearer " + config_.bearer_token) {
      resp = error_response(401, "missing or invalid bearer token");
      return;
    }
    constexpr std::string_view kMemory = "/v1/memory/";
    if (path.substr(0, kMemory.size()) == kMemory) {
      session_for_log = std::string(path.substr(kMemory.size()));
      if (session_for_log.empty() || session_for_log.find('/') != std::string::npos) {
        resp = error_response(404, "no such route");
      } else if (method == "GET") {
        resp = memory_get(session_for_log);
      } else if (method == "DELETE") {
        resp = memory_delete(session_for_log);
      } else {
        resp = error_response(405, "use GET or DELETE");
      }
      return;
    }
    if (path != "/v1/detect" && path != "/v1/sanitize") {
      resp = error_response(404, "no such route");
      return;
    }
    if (method != "POST") {
      resp = error_response(405, "use POST");
      return;
    }
    if (body.size() > config_.max_image_bytes / 3 * 4 + (1u << 20)) {
      resp = error_response(413, "request body too large");
      return;
    }
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      resp = error_response(400, "body must be a JSON object");
      return;
    }
    if (j.contains("session") && j["session"].is_string()) session_for_log = j["session"].get<std::string>();
    try {
      resp = path == "/v1/detect" ? detect(j) : sanitize(j);
      if (resp.body.contains("session")) session_for_log = resp.body["session"].get<std::string>();
    } catch (const BadRequest& e) {
      resp = error_response(e.status, e.message);
    }
  }();
  log_access(method, path, resp.status, body.size(), session_for_log);
  return resp;
}

Gateway::Response Gateway::detect(const json& body) {
  auto bytes = decode_image_field(body, config_.max_image_bytes);
  if (!detector_) return error_response(503, "no detector endpoint configured");
  ChatImage img;
  img.mime = sniff_mime(bytes);
  img.bytes = std::move(bytes);
  try {
    auto out = recognize(*detector_, img, string_field(body, "goal"), string_field(body, "response"),
                         config_.detect_mode);
    return {200, output_to_json(out)};
  } catch (const Error& e) {
    return error_response(502, std::string("detector failed: ") + e.what(),
                          {{"code", error_code_name(e.code())}, {"max_retries", detector_->endpoint().max_retries}});
  }
}

Gateway::Response Gateway::sanitize(const json& body) {
  const auto bytes = decode_image_field(body, config_.max_image_bytes);
  const bool want_detect = body.value("detect", false);
  const bool create = body.value("create", true);

  std::optional<ProtectionPolicy> policy;
  if (body.contains("policy")) {
    try {
      policy = policy_from_json(body["policy"]);
    } catch (const Error& e) {
      throw BadRequest{400, std::string("invalid policy: ") + e.what()};
    }
  }

  std::vector<PrivacyElement> elements;
  if (body.contains("elements")) {
    if (!body["elements"].is_array()) throw BadRequest{400, "field 'elements' must be an array"};
    try {
      for (std::size_t i = 0; i < body["elements"].size(); ++i) {
        elements.push_back(element_from_json(body["elements"][i], "elements[" + std::to_string(i) + "]"));
      }
    } catch (const Error& e) {
      throw BadRequest{400, e.what()};
    }
  } else if (!want_detect) {
    throw BadRequest{400, "provide 'elements' or set 'detect': true"};
  }

  Image image;
  try {
    image = decode_image(bytes);
  } catch (const Error& e) {
    throw BadRequest{400, e.what()};
  }

  std::string id = string_field(body, "session");
  if (id.empty()) {
    if (!create) throw BadRequest{400, "field 'session' is required when create is false"};
    id = fresh_session_id();
  }
  auto session = find_session(id, create);
  if (!session) return error_response(404, "unknown session '" + id + "'");

  std::lock_guard lock(session->mutex);
  session->last_used = config_.clock();
  ++session->requests;
  if (policy) session->policy = policy;
  if (!session->policy) session->policy = config_.default_policy;
  if (!session->policy) throw BadRequest{400, "no policy given and no default policy configured"};

  json detection;
  if (want_detect) {
    if (!detector_) return error_response(503, "no detector endpoint configured");
    ChatImage img{sniff_mime(bytes), bytes};
    try {
      auto found = recognize(*detector_, img, string_field(body, "goal"), string_field(body, "response"),
                             config_.detect_mode);
      detection = output_to_json(found);
      for (auto& e : found.elements) elements.push_back(std::move(e));
    } catch (const Error& e) {
      return error_response(502, std::string("detector failed: ") + e.what(),
                            {{"code", error_code_name(e.code())},
                             {"max_retries", detector_->endpoint().max_retries}});
    }
  }

  Protected out;
  try {
    out = protect(image, elements, *session->policy, &session->memory);
  } catch (const Error& e) {
    throw BadRequest{400, e.what()};
  }
  json resp = {{"session", id}, {"report", report_to_json(out.report)}};
  if (out.report.regions.empty()) {
    resp["image"] = body["image"];
    resp["mime"] = sniff_mime(bytes);
  } else {
    resp["image"] = codec::base64_encode(encode_png(out.image));
    resp["mime"] = "image/png";
  }
  if (want_detect) resp["detection"] = std::move(detection);
  return {200, std::move(resp)};
}

Gateway::Response Gateway::memory_get(const std::string& id) {
  auto session = find_session(id, false);
  if (!session) return error_response(404, "unknown session '" + id + "'");
  json entries = json::array();
  for (const auto& e : session->memory.snapshot()) {
    entries.push_back({{"original", e.original},
                       {"pseudonym", e.pseudonym},
                       {"category", e.category ? json(category_index(*e.category)) : json(nullptr)}});
  }
  return {200, {{"session", id}, {"entries", std::move(entries)}}};
}

Gateway::Response Gateway::memory_delete(const std::string& id) {
  std::shared_ptr<Session> removed;
  {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return error_response(404, "unknown session '" + id + "'");
    removed = it->second;
    sessions_.erase(it);
  }
  std::lock_guard session_lock(removed->mutex);
  const auto n = removed->memory.size();
  if (config_.access_log) {
    std::lock_guard lock(log_mutex_);
    *config_.access_log << json{{"event", "memory_purged"}, {"session", id}, {"entries", n}}.dump() << "\n"
                        << std::flush;
  }
  return {200, {{"session", id}, {"purged", n}}};
}

struct GatewayServer::Impl {
  explicit Impl(Gateway& g) : gateway(g) {}
  Gateway& gateway;
  httplib::Server server;
};

GatewayServer::GatewayServer(Gateway& gateway) : impl_(std::make_unique<Impl>(gateway)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    auto r = impl_->gateway.handle(req.method, req.path, req.body, req.get_header_value("Authorization"));
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  impl_->server.Post(".*", route);
  impl_->server.Get(".*", route);
  impl_->server.Delete(".*", route);
  impl_->server.Put(".*", route);
}

GatewayServer::~GatewayServer() { stop(); }

int GatewayServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool GatewayServer::listen() { return impl_->server.listen_after_bind(); }

void GatewayServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void GatewayServer::wait_until_ready() { impl_->server.wait_until_ready(); }

}  // namespace guiguard
