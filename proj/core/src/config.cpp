#include "recap/config.hpp"

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <initializer_list>

#include <fmt/format.h>

#include "json_types.hpp"
#include "recap/error.hpp"

namespace recap {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) {
  throw Error(ErrorCode::kInvalidArgument, "config: " + msg);
}

void check_keys(const json& j, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) bad(fmt::format("{} must be an object", where));
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) bad(fmt::format("unknown key {}.{}", where, key));
  }
}

template <typename T>
void read_into(const json& j, const char* key, T& out, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!detail::json_holds<T>(*it)) {
    bad(fmt::format("{}.{} has the wrong type", where, key));
  }
  out = it->get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

}  // namespace

std::string_view to_string(BackendKind k) { return k == BackendKind::kStub ? "stub" : "http"; }

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "stub") return BackendKind::kStub;
  if (s == "http") return BackendKind::kHttp;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown backend '{}'", s));
}

AppConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "config",
             {"listen", "limits", "data_dir", "service_token_env_var", "backend", "pipeline",
              "training_weights", "journal"});
  AppConfig cfg;
  if (auto it = j.find("listen"); it != j.end()) {
    check_keys(*it, "listen", {"host", "port"});
    read_into(*it, "host", cfg.listen_host, "listen");
    std::int64_t port = cfg.listen_port;
    read_into(*it, "port", port, "listen");
    if (port < 0 || port > 65535) bad("listen.port out of range");
    cfg.listen_port = static_cast<int>(port);
  }
  if (auto it = j.find("limits"); it != j.end()) {
    check_keys(*it, "limits", {"max_body_bytes", "sync_cutoff_utterances"});
    read_into(*it, "max_body_bytes", cfg.max_body_bytes, "limits");
    read_into(*it, "sync_cutoff_utterances", cfg.sync_cutoff_utterances, "limits");
  }
  if (auto it = j.find("data_dir"); it != j.end()) {
    std::string dir;
    read_into(j, "data_dir", dir, "config");
    cfg.data_dir = resolve(base_dir, dir);
  }
  read_into(j, "service_token_env_var", cfg.service_token_env_var, "config");
  if (auto it = j.find("backend"); it != j.end()) {
    const auto& b = *it;
    check_keys(b, "backend",
               {"kind", "endpoint", "timeout_ms", "retries", "backoff_base_ms", "max_parallel",
                "auth_token_env_var", "payload_template"});
    std::string kind(to_string(cfg.backend));
    read_into(b, "kind", kind, "backend");
    cfg.backend = backend_kind_from_string(kind);
    read_into(b, "endpoint", cfg.policy.endpoint, "backend");
    read_into(b, "timeout_ms", cfg.policy.timeout_ms, "backend");
    read_into(b, "retries", cfg.policy.retries, "backend");
    read_into(b, "backoff_base_ms", cfg.policy.backoff_base_ms, "backend");
    read_into(b, "max_parallel", cfg.policy.max_parallel, "backend");
    read_into(b, "auth_token_env_var", cfg.policy.auth_token_env_var, "backend");
    if (auto pt = b.find("payload_template"); pt != b.end()) {
      if (pt->is_string()) {
        cfg.policy.payload = PayloadTemplate::load(resolve(base_dir, pt->get<std::string>()));
      } else if (pt->is_object()) {
        try {
          cfg.policy.payload = PayloadTemplate::from_json(*pt);
        } catch (const json::exception& e) {
          bad(fmt::format("backend.payload_template: {}", e.what()));
        }
      } else {
        bad("backend.payload_template must be a path or an object");
      }
    }
    cfg.policy.validate();
    if (cfg.backend == BackendKind::kHttp && cfg.policy.endpoint.empty()) {
      bad("backend.endpoint is required for the http backend");
    }
  }
  if (auto it = j.find("pipeline"); it != j.end()) {
    cfg.pipeline = pipeline_config_from_json(*it);
  }
  if (auto it = j.find("training_weights"); it != j.end()) {
    check_keys(*it, "training_weights",
               {"edit", "add", "share", "navigation", "ambiguous_negative"});
    read_into(*it, "edit", cfg.weights.edit, "training_weights");
    read_into(*it, "add", cfg.weights.add, "training_weights");
    read_into(*it, "share", cfg.weights.share, "training_weights");
    read_into(*it, "navigation", cfg.weights.navigation, "training_weights");
    read_into(*it, "ambiguous_negative", cfg.weights.ambiguous_negative, "training_weights");
    cfg.weights.validate();
  }
  if (auto it = j.find("journal"); it != j.end()) {
    check_keys(*it, "journal", {"path", "verbose"});
    if (it->contains("path")) {
      std::string p;
      read_into(*it, "path", p, "journal");
      cfg.journal_path = resolve(base_dir, p);
    }
    read_into(*it, "verbose", cfg.journal_verbose, "journal");
  }
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read config {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    bad(fmt::format("{}: {}", path.string(), e.what()));
  }
  return config_from_json(j, path.parent_path());
}

void apply_environment(AppConfig& cfg) {
  if (const char* dir = std::getenv("RECAP_DATA_DIR"); dir != nullptr && *dir != '\0') {
    cfg.data_dir = dir;
  }
}

std::shared_ptr<RequestJournal> make_journal(const AppConfig& cfg) {
  return std::make_shared<RequestJournal>(cfg.journal_verbose
                                              ? RequestJournal::Verbosity::kVerbose
                                              : RequestJournal::Verbosity::kDefault,
                                          cfg.journal_path);
}

std::unique_ptr<Backend> make_backend(const AppConfig& cfg,
                                      std::shared_ptr<RequestJournal> journal) {
  if (cfg.backend == BackendKind::kHttp) {
    return std::make_unique<HttpBackend>(cfg.policy, std::move(journal));
  }
  return std::make_unique<StubBackend>(cfg.policy.max_parallel);
}

}  // namespace recap
