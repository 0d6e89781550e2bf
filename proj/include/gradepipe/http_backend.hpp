#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#endif
#include <httplib.h>

#include <cstdlib>
#include <string>

#include "gradepipe/backend.hpp"
#include "gradepipe/digest.hpp"

namespace gradepipe {

struct HttpBackendConfig {
  std::string api_base;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string model_id;
  int timeout_seconds = 120;
};

/// Reads GRADEPIPE_API_BASE and GRADEPIPE_API_KEY.
inline HttpBackendConfig http_config_from_env(std::string model_id) {
  HttpBackendConfig c;
  const char* base = std::getenv("GRADEPIPE_API_BASE");
  const char* key = std::getenv("GRADEPIPE_API_KEY");
  if (!base || !*base) throw ValidationError("GRADEPIPE_API_BASE is not set");
  c.api_base = base;
  c.api_key = key ? key : "";
  c.model_id = std::move(model_id);
  return c;
}

/// Reasoning-model families reject the temperature parameter.
inline bool model_accepts_temperature(std::string_view model_id) {
  for (std::string_view p : {"o1", "o3", "o4"}) {
    if (model_id.starts_with(p)) return false;
  }
  return true;
}

inline std::string image_mime_type(const std::string& path) {
  const auto ext = to_lower_ascii(std::filesystem::path(path).extension().string());
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/png";
}

/// Chat-completions client. One HTTP client per call, so concurrent use is safe.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    while (!config_.api_base.empty() && config_.api_base.back() == '/') config_.api_base.pop_back();
    const auto scheme_end = config_.api_base.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("API base must include a scheme: " + config_.api_base);
    const auto path_start = config_.api_base.find('/', scheme_end + 3);
    origin_ = config_.api_base.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : config_.api_base.substr(path_start);
  }

  std::string transcribe(const std::string& image_path, const PromptBundle& bundle) override {
    const std::string data_url = "data:" + image_mime_type(image_path) + ";base64," + base64_encode(read_file(image_path));
    json user_content = json::array({json{{"type", "text"}, {"text", bundle.user_message}},
                                     json{{"type", "image_url"}, {"image_url", {{"url", data_url}}}}});
    return post(request_body(bundle, user_content));
  }

  std::string complete(const PromptBundle& bundle) override { return post(request_body(bundle, bundle.user_message)); }

  std::string model_id() const override { return config_.model_id; }

  json request_body(const PromptBundle& bundle, const json& user_content) const {
    json messages = json::array();
    if (!bundle.system_message.empty()) messages.push_back({{"role", "system"}, {"content", bundle.system_message}});
    messages.push_back({{"role", "user"}, {"content", user_content}});
    json body{{"model", config_.model_id}, {"messages", messages}};
    if (model_accepts_temperature(config_.model_id)) body["temperature"] = bundle.temperature;
    return body;
  }

 private:
  std::string post(const json& body) const {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
      throw TransportError("HTTP " + std::to_string(res->status) + " from backend");
    }
    if (res->status != 200) {
      throw BackendError("HTTP " + std::to_string(res->status) + " from backend: " + res->body.substr(0, 500));
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) throw TransportError("backend returned a non-JSON body");
    try {
      const auto& content = doc.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw TransportError("backend message content is not text");
      return content.get<std::string>();
    } catch (const json::exception& e) {
      throw TransportError(std::string("unexpected backend response shape: ") + e.what());
    }
  }

  HttpBackendConfig config_;
  std::string origin_;
  std::string path_prefix_;
};

}  // namespace gradepipe
