#pragma once

#include <memory>
#include <optional>
#include <string>

#include "recap/service/service.hpp"

namespace recap::service {

// /v1 HTTP front end over a Service.
//
//   POST /v1/meetings?format=plain|srt|vtt        201 | 202 | 400 | 413 | 422
//   GET  /v1/meetings/{id}/status                 200 | 404
//   GET  /v1/meetings/{id}/recap?view=...         200 | 304 | 404 | 409
//   POST /v1/meetings/{id}/events                 200 | 400 | 403 | 404 | 409
//   GET  /v1/meetings/{id}/export/training        200 (ndjson)
//   GET  /v1/meetings/{id}/export/markdown        200 (text/markdown)
//   GET  /v1/meetings/{id}/share?node=&depth=     200 (text/markdown)
//   GET  /v1/meetings/{id}/transcript             200 | 403 (X-Owner-Token)
//   GET  /v1/healthz                              200
//
// When the configured service token variable is set, every route except
// healthz requires "Authorization: Bearer <token>".
class HttpServer {
 public:
  HttpServer(Service& service, std::optional<std::string> bearer_token = std::nullopt);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws kIo on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  // bind() + serve() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Reads the deployment token from the variable named in the config, if set.
std::optional<std::string> service_token_from_env(const AppConfig& cfg);

}  // namespace recap::service
