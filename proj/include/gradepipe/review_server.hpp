#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#endif
#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include "gradepipe/http_backend.hpp"
#include "gradepipe/review.hpp"

namespace gradepipe {

struct ReviewServerOptions {
  std::optional<std::string> token;  // bearer token; absent means open
  std::optional<std::filesystem::path> ui_dir;
};

inline std::optional<std::string> review_token_from_env() {
  const char* t = std::getenv("GRADEPIPE_REVIEW_TOKEN");
  if (!t || !*t) return std::nullopt;
  return std::string(t);
}

inline int http_status_for(const Error& e) {
  if (dynamic_cast<const NotFound*>(&e)) return 404;
  if (dynamic_cast<const Conflict*>(&e)) return 409;
  return 422;
}

/// HTTP front for a ReviewStore.
///
///   GET  /queue?state=open|resolved|all
///   GET  /items/{id}
///   GET  /items/{id}/images/{n}
///   POST /items/{id}/verdict
///   GET  /stats
///   GET  /verdicts.csv
///   GET  /ui/...           (static files, when configured)
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, ReviewServerOptions options) : store_(store), options_(std::move(options)) {
    routes();
  }

  httplib::Server& http() { return server_; }

  /// Binds and serves on the calling thread until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  int bind_any_port(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, json{{"error", {{"code", code}, {"message", message}}}});
  }

  template <class Handler>
  httplib::Server::Handler guarded(Handler h) {
    return [this, h](const httplib::Request& req, httplib::Response& res) {
      if (options_.token && req.get_header_value("Authorization") != "Bearer " + *options_.token) {
        send_error(res, 401, "Unauthorized", "missing or invalid bearer token");
        return;
      }
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, http_status_for(e), e.code(), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  }

  void routes() {
    server_.Get("/queue", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string state = req.has_param("state") ? to_lower_ascii(req.get_param_value("state")) : "open";
      std::optional<ReviewState> filter;
      if (state == "open") filter = ReviewState::Open;
      else if (state == "resolved") filter = ReviewState::Resolved;
      else if (state != "all") throw ValidationError("state must be open, resolved or all");
      json items = json::array();
      for (const auto& i : store_.list(filter)) items.push_back(item_summary_json(i));
      send_json(res, 200, json{{"count", items.size()}, {"items", items}});
    }));

    server_.Get(R"(/items/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, item_to_json(store_.get(req.matches[1])));
    }));

    server_.Get(R"(/items/([0-9a-f]+)/images/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto item = store_.get(req.matches[1]);
      const auto n = std::stoul(req.matches[2]);
      if (n >= item.image_refs.size()) throw NotFound("item has no image " + std::to_string(n));
      const std::string& path = item.image_refs[n];
      if (!std::filesystem::exists(path)) throw NotFound("image file is missing");
      res.set_content(read_file(path), image_mime_type(path));
    }));

    server_.Post(R"(/items/([0-9a-f]+)/verdict)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) throw ValidationError("verdict body must be a JSON object");
      const ReviewItem item = store_.resolve(req.matches[1], verdict_from_json(body));
      send_json(res, 200, item_to_json(item));
    }));

    server_.Get("/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, verdicts_to_json(store_.stats()));
    }));

    server_.Get("/verdicts.csv", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto v = store_.verdict_records();
      res.set_content(format_verdicts_csv(v), "text/csv");
    }));

    if (options_.ui_dir) {
      if (!server_.set_mount_point("/ui", options_.ui_dir->string())) {
        throw IoError("UI directory not found: " + options_.ui_dir->string());
      }
    }
  }

  ReviewStore& store_;
  ReviewServerOptions options_;
  httplib::Server server_;
};

}  // namespace gradepipe
