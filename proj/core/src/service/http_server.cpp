#include "recap/service/http_server.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include <fmt/format.h>

#include "recap/error.hpp"
#include "recap/log.hpp"
#include "recap/text.hpp"

namespace recap::service {
namespace {

using nlohmann::json;

constexpr const char* kMeetingRoute = R"(/v1/meetings/([A-Za-z0-9_-]+))";

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedInput:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kValidationFailure:
    case ErrorCode::kIllegalAction:
    case ErrorCode::kNodeNotFound:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kCrossRefInvalid:
      return 400;
    case ErrorCode::kForbidden: return 403;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kNotReady:
    case ErrorCode::kStaleVersion:
      return 409;
    case ErrorCode::kTooLarge: return 413;
    case ErrorCode::kEmptyTranscript: return 422;
    case ErrorCode::kBackendFailure: return 502;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                std::string_view message, json extra = json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    const int status = status_for(e.code());
    if (status >= 500) logger().error("request failed: {}", e.what());
    send_error(res, status, to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    logger().error("request failed: {}", e.what());
    send_error(res, 500, "internal", e.what());
  }
}

std::string param_or(const httplib::Request& req, const char* key, std::string fallback) {
  return req.has_param(key) ? req.get_param_value(key) : std::move(fallback);
}

std::string etag_for(std::uint64_t version) { return fmt::format("\"{}\"", version); }

bool etag_matches(std::string_view header, std::uint64_t version) {
  const auto want = std::to_string(version);
  std::size_t pos = 0;
  while (pos <= header.size()) {
    auto comma = header.find(',', pos);
    if (comma == std::string_view::npos) comma = header.size();
    auto tag = text::trim(header.substr(pos, comma - pos));
    if (tag == "*") return true;
    if (tag.starts_with("W/")) tag.remove_prefix(2);
    if (tag.size() >= 2 && tag.front() == '"' && tag.back() == '"') {
      tag = tag.substr(1, tag.size() - 2);
    }
    if (tag == want) return true;
    pos = comma + 1;
  }
  return false;
}

json status_json(const MeetingStatus& s) {
  json j = {{"meeting_id", s.meeting_id},
            {"status", std::string(to_string(s.status))},
            {"version", s.version},
            {"event_count", s.event_count}};
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

}  // namespace

struct HttpServer::Impl {
  Service& service;
  std::optional<std::string> bearer;
  httplib::Server server;
  std::jthread thread;

  Impl(Service& s, std::optional<std::string> token) : service(s), bearer(std::move(token)) {}

  bool owner(const httplib::Request& req, const std::string& id) {
    return service.is_owner(id, req.get_header_value("X-Owner-Token"));
  }

  void routes() {
    server.set_payload_max_length(service.config().max_body_bytes);
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (!bearer || req.path == "/v1/healthz") return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("Authorization") != "Bearer " + *bearer) {
        send_error(res, 401, "unauthorized", "missing or wrong bearer token");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      logger().debug("{} {} -> {}", req.method, req.path, res.status);
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const auto code = res.status == 413 ? "too_large" : "http_error";
      send_error(res, res.status, code, httplib::status_message(res.status));
    });

    server.Get("/v1/healthz", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    server.Post("/v1/meetings", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::optional<SourceFormat> fmt;
        if (req.has_param("format")) fmt = source_format_from_string(req.get_param_value("format"));
        auto r = service.ingest(req.body, fmt, req.get_header_value("X-Actor"));
        json body = {{"meeting_id", r.meeting_id},
                     {"owner_token", r.owner_token},
                     {"status", std::string(to_string(r.status))}};
        res.set_header("Location", "/v1/meetings/" + r.meeting_id);
        if (r.status == JobStatus::kReady) {
          body["version"] = r.version;
          send_json(res, 201, body);
        } else {
          send_json(res, 202, body);
        }
      });
    });

    server.Get(std::string(kMeetingRoute) + "/status",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send_json(res, 200, status_json(service.status(req.matches[1]))); });
               });

    server.Get(std::string(kMeetingRoute) + "/recap",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const auto view = view_from_string(param_or(req, "view", "both"));
                   const auto doc = service.recap(req.matches[1]);
                   res.set_header("ETag", etag_for(doc.version));
                   if (req.has_header("If-None-Match") &&
                       etag_matches(req.get_header_value("If-None-Match"), doc.version)) {
                     res.status = 304;
                     return;
                   }
                   send_json(res, 200, project(doc, view));
                 });
               });

    server.Post(std::string(kMeetingRoute) + "/events",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] { post_event(req, res); });
                });

    server.Get(std::string(kMeetingRoute) + "/export/training",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const std::string id = req.matches[1];
                   res.set_content(service.export_training(id, owner(req, id)),
                                   "application/x-ndjson");
                 });
               });

    server.Get(std::string(kMeetingRoute) + "/export/markdown",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const auto view = view_from_string(param_or(req, "view", "both"));
                   res.set_content(service.export_markdown(req.matches[1], view),
                                   "text/markdown; charset=utf-8");
                 });
               });

    server.Get(std::string(kMeetingRoute) + "/share",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const std::string id = req.matches[1];
                   if (!req.has_param("node")) {
                     throw Error(ErrorCode::kInvalidArgument, "query parameter 'node' is required");
                   }
                   const auto depth = share_depth_from_string(param_or(req, "depth", "one_liner"));
                   const auto ex = service.share(id, req.get_param_value("node"), depth,
                                                 owner(req, id));
                   res.set_content(ex.rendered, "text/markdown; charset=utf-8");
                 });
               });

    server.Get(std::string(kMeetingRoute) + "/transcript",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const auto t = service.transcript(req.matches[1],
                                                     req.get_header_value("X-Owner-Token"));
                   res.set_content(to_canonical(t), "application/json");
                 });
               });
  }

  void post_event(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kMalformedInput, std::string("event body is not JSON: ") + e.what());
    }
    if (body.is_object() && !body.contains("meeting_id")) body["meeting_id"] = id;
    auto ev = event_from_json(body);
    const auto actor = req.get_header_value("X-Actor");
    if (actor.empty() || actor != ev.actor) {
      send_error(res, 403, "forbidden", "event actor does not match X-Actor");
      return;
    }
    try {
      const auto r = service.post_event(id, std::move(ev));
      res.set_header("ETag", etag_for(r.new_version));
      send_json(res, 200, {{"new_version", r.new_version}, {"position", r.position}});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kStaleVersion) throw;
      const auto current = service.status(id).version;
      send_error(res, 409, to_string(e.code()), e.what(), {{"current_version", current}});
    }
  }
};

HttpServer::HttpServer(Service& service, std::optional<std::string> bearer_token)
    : impl_(std::make_unique<Impl>(service, std::move(bearer_token))) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error(ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
  return bound;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::jthread([this] { serve(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::optional<std::string> service_token_from_env(const AppConfig& cfg) {
  if (cfg.service_token_env_var.empty()) return std::nullopt;
  const char* v = std::getenv(cfg.service_token_env_var.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace recap::service
