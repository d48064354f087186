#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "recap/backend.hpp"
#include "recap/feedback.hpp"
#include "recap/pipeline.hpp"

namespace recap {

enum class BackendKind { kStub, kHttp };

std::string_view to_string(BackendKind k);
BackendKind backend_kind_from_string(std::string_view s);

// Settings shared by the CLI and the service. Secrets never live here: the
// backend token and the deployment bearer token are read from the
// environment variables named below.
struct AppConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::size_t max_body_bytes = 10 * 1024 * 1024;
  std::size_t sync_cutoff_utterances = 200;
  // Empty: meetings are kept in memory only.
  std::filesystem::path data_dir;
  std::string service_token_env_var = "RECAP_SERVICE_TOKEN";

  BackendKind backend = BackendKind::kStub;
  BackendPolicy policy;

  PipelineConfig pipeline;
  TrainingWeights weights;

  std::optional<std::filesystem::path> journal_path;
  bool journal_verbose = false;
};

// Unknown keys are rejected so typos surface early. Relative paths resolve
// against `base_dir`. Throws kInvalidArgument.
AppConfig config_from_json(const nlohmann::json& j,
                           const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

// RECAP_DATA_DIR overrides data_dir when set.
void apply_environment(AppConfig& cfg);

std::unique_ptr<Backend> make_backend(const AppConfig& cfg,
                                      std::shared_ptr<RequestJournal> journal = nullptr);
std::shared_ptr<RequestJournal> make_journal(const AppConfig& cfg);

}  // namespace recap
