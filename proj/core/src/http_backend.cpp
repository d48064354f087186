#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "recap/backend.hpp"
#include "recap/error.hpp"
#include "recap/text.hpp"
#include "recap/transcript.hpp"

namespace recap {
namespace {

using nlohmann::json;

bool is_transient_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

std::string replace_all(std::string s, std::string_view from,
                        std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

json render_value(const json& node, const BackendRequest& req) {
  if (node.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : node.items()) out[k] = render_value(v, req);
    return out;
  }
  if (node.is_array()) {
    json out = json::array();
    for (const auto& v : node) out.push_back(render_value(v, req));
    return out;
  }
  if (!node.is_string()) return node;
  const auto& s = node.get_ref<const std::string&>();
  const std::string style =
      req.style ? std::string(to_string(*req.style)) : std::string();
  if (s == "{{focus}}") return req.focus_text;
  if (s == "{{context}}") return req.context_text;
  if (s == "{{capability}}") return to_string(req.capability);
  if (s == "{{task}}") return to_string(req.task);
  if (s == "{{budget}}") return req.token_budget;
  if (s == "{{style}}") return req.style ? json(style) : json(nullptr);
  std::string out = s;
  out = replace_all(std::move(out), "{{focus}}", req.focus_text);
  out = replace_all(std::move(out), "{{context}}", req.context_text);
  out = replace_all(std::move(out), "{{capability}}", to_string(req.capability));
  out = replace_all(std::move(out), "{{task}}", to_string(req.task));
  out = replace_all(std::move(out), "{{budget}}", std::to_string(req.token_budget));
  out = replace_all(std::move(out), "{{style}}", style);
  return out;
}

double unit_score(const json& scores, const char* key) {
  if (!scores.contains(key)) return 0.0;
  const auto& v = scores.at(key);
  if (!v.is_number()) throw std::invalid_argument(fmt::format("{} not numeric", key));
  const double d = v.get<double>();
  if (!(d >= 0.0 && d <= 1.0)) {
    throw std::invalid_argument(fmt::format("{}={} outside [0,1]", key, d));
  }
  return d;
}

}  // namespace

PayloadTemplate PayloadTemplate::default_template() {
  PayloadTemplate t;
  t.body = {{"capability", "{{capability}}"}, {"focus", "{{focus}}"},
            {"context", "{{context}}"},       {"style", "{{style}}"},
            {"budget", "{{budget}}"},         {"task", "{{task}}"}};
  return t;
}

PayloadTemplate PayloadTemplate::from_json(const json& j) {
  auto t = default_template();
  if (j.contains("body")) t.body = j.at("body");
  if (j.contains("text_pointer")) t.text_pointer = j.at("text_pointer").get<std::string>();
  if (j.contains("scores_pointer")) {
    t.scores_pointer = j.at("scores_pointer").get<std::string>();
  }
  return t;
}

PayloadTemplate PayloadTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo,
                fmt::format("cannot read payload template {}", path.string()));
  }
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("bad payload template {}: {}", path.string(), e.what()));
  }
}

json PayloadTemplate::render(const BackendRequest& req) const {
  return render_value(body, req);
}

void BackendPolicy::validate() const {
  if (max_parallel < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_parallel must be >= 1");
  }
  if (retries < 0 || timeout_ms <= 0 || backoff_base_ms < 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "retries, timeout_ms and backoff_base_ms must be non-negative");
  }
}

HttpBackend::HttpBackend(BackendPolicy policy,
                         std::shared_ptr<RequestJournal> journal)
    : policy_(std::move(policy)),
      journal_(std::move(journal)),
      limit_(policy_.max_parallel) {
  policy_.validate();
  const auto& url = policy_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("backend endpoint '{}' has no scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  endpoint_.scheme_host_port = url.substr(0, path_start);
  endpoint_.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (!policy_.auth_token_env_var.empty()) {
    if (const char* tok = std::getenv(policy_.auth_token_env_var.c_str())) {
      token_ = tok;
    }
  }
}

HttpBackend::~HttpBackend() = default;

void HttpBackend::journal(const BackendRequest& req, int attempt,
                          std::string outcome) {
  if (!journal_) return;
  JournalEntry e;
  e.at_ms = now_ms();
  e.capability = req.capability;
  e.token_count = estimate_tokens(req.focus_text) + estimate_tokens(req.context_text);
  e.attempt = attempt;
  e.outcome = std::move(outcome);
  e.focus_text = req.focus_text;
  e.context_text = req.context_text;
  journal_->append(std::move(e));
}

BackendResponse HttpBackend::parse_response(const BackendRequest& req,
                                            std::string_view body) const {
  BackendResponse resp;
  resp.capability = req.capability;
  try {
    const auto doc = json::parse(body);
    if (req.capability == Capability::kClassify) {
      const auto& scores = doc.at(json::json_pointer(policy_.payload.scores_pointer));
      if (!scores.is_object()) throw std::invalid_argument("scores not an object");
      resp.scores.key_point = unit_score(scores, "key_point");
      resp.scores.action_item = unit_score(scores, "action_item");
      resp.scores.boundary = unit_score(scores, "boundary");
    } else {
      const auto& t = doc.at(json::json_pointer(policy_.payload.text_pointer));
      resp.text = std::string(text::trim(t.get<std::string>()));
      if (resp.text.empty()) throw std::invalid_argument("empty text");
    }
  } catch (const std::exception& e) {
    throw BackendFailure(BackendFailureKind::kMalformedResponse, e.what());
  }
  return resp;
}

BackendResponse HttpBackend::invoke(const BackendRequest& req) {
  try {
    req.validate();
  } catch (const Error&) {
    journal(req, 0, "rejected");
    throw;
  }
  const auto body = policy_.payload.render(req).dump();
  const int max_attempts = policy_.retries + 1;
  std::string last_cause;
  int last_status = 0;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) {
      const auto backoff = policy_.backoff_base_ms << (attempt - 2);
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
    httplib::Client client(endpoint_.scheme_host_port);
    const auto secs = policy_.timeout_ms / 1000;
    const auto usecs = (policy_.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (token_) headers.emplace("Authorization", "Bearer " + *token_);

    limit_.acquire();
    auto result = client.Post(endpoint_.path, headers, body, "application/json");
    limit_.release();

    if (!result) {
      const auto err = result.error();
      const bool timeout = err == httplib::Error::ConnectionTimeout ||
                           err == httplib::Error::Read ||
                           err == httplib::Error::Write;
      last_cause = timeout ? "timeout" : "transport: " + httplib::to_string(err);
      last_status = 0;
      journal(req, attempt, timeout ? "timeout" : "transport");
      spdlog::debug("backend attempt {}/{} failed: {}", attempt, max_attempts,
                    last_cause);
      continue;
    }
    const int status = result->status;
    if (status >= 200 && status < 300) {
      try {
        auto resp = parse_response(req, result->body);
        journal(req, attempt, "ok");
        return resp;
      } catch (const BackendFailure&) {
        journal(req, attempt, "malformed");
        throw;
      }
    }
    journal(req, attempt, fmt::format("http:{}", status));
    if (!is_transient_status(status)) {
      throw BackendFailure(BackendFailureKind::kHttp,
                           fmt::format("endpoint returned {}", status), status,
                           attempt);
    }
    last_cause = fmt::format("http {}", status);
    last_status = status;
  }
  throw BackendFailure(BackendFailureKind::kExhausted,
                       fmt::format("{} attempts failed, last: {}", max_attempts,
                                   last_cause),
                       last_status, max_attempts);
}

}  // namespace recap
