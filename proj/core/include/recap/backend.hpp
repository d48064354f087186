#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recap {

// The three model capabilities the recap pipelines need. Both abstractive
// models share kRewrite; the segment scorer uses kClassify with
// ClassifyTask::kBoundary.
enum class Capability { kClassify, kRewrite, kTitle };
enum class TitleStyle { kTitle, kSentence };
enum class ClassifyTask { kHighlight, kBoundary };

std::string_view to_string(Capability c);
std::string_view to_string(TitleStyle s);
std::string_view to_string(ClassifyTask t);

struct BackendRequest {
  Capability capability = Capability::kClassify;
  // Classify: the utterance text. Rewrite/Title: "Speaker: text" lines.
  std::string focus_text;
  std::string context_text;
  std::optional<TitleStyle> style;
  std::size_t token_budget = 512;
  ClassifyTask task = ClassifyTask::kHighlight;

  // Throws kInvalidArgument: blank focus for Classify/Rewrite, or a context
  // whose token estimate exceeds token_budget.
  void validate() const;
};

struct ClassifyScores {
  double key_point = 0.0;
  double action_item = 0.0;
  double boundary = 0.0;

  bool operator==(const ClassifyScores&) const = default;
};

struct BackendResponse {
  Capability capability = Capability::kClassify;
  ClassifyScores scores;  // kClassify only
  std::string text;       // kRewrite / kTitle only

  bool operator==(const BackendResponse&) const = default;
};

class Backend {
 public:
  virtual ~Backend() = default;

  // Throws BackendFailure; callers decide whether to drop or fall back.
  virtual BackendResponse invoke(const BackendRequest& req) = 0;

  // Upper bound on concurrent invoke() calls a caller should issue.
  virtual std::size_t max_parallel() const { return 1; }
};

// Deterministic offline backend: cue-phrase classifier, pronoun-template
// rewriter, leading-content-words titler. No shared state.
class StubBackend final : public Backend {
 public:
  explicit StubBackend(std::size_t max_parallel = 4)
      : max_parallel_(max_parallel) {}

  BackendResponse invoke(const BackendRequest& req) override;
  std::size_t max_parallel() const override { return max_parallel_; }

 private:
  std::size_t max_parallel_;
};

namespace stub {

inline constexpr double kCueHitScore = 0.9;

ClassifyScores classify_highlight(std::string_view utterance);
double boundary_score(std::string_view focus, std::string_view context);

// Rewrites "Speaker: text" lines into third person. Each line is rewritten
// independently and the results joined with a space.
std::string rewrite(std::string_view focus);
std::string rewrite_line(std::string_view speaker, std::string_view text);

std::string title(std::string_view focus, TitleStyle style);

}  // namespace stub

// ---------------------------------------------------------------------------
// Request journal

struct JournalEntry {
  std::int64_t at_ms = 0;
  Capability capability = Capability::kClassify;
  std::size_t token_count = 0;
  int attempt = 1;
  // "ok", "rejected", "timeout", "http:<status>", "transport", "malformed",
  // "error".
  std::string outcome;
  // Only populated at verbose level.
  std::optional<std::string> focus_text;
  std::optional<std::string> context_text;
};

// Append-only, thread-safe. Transcript text is recorded only at kVerbose.
class RequestJournal {
 public:
  enum class Verbosity { kDefault, kVerbose };

  explicit RequestJournal(Verbosity verbosity = Verbosity::kDefault,
                          std::optional<std::filesystem::path> file = {});

  Verbosity verbosity() const { return verbosity_; }
  void append(JournalEntry entry);
  std::vector<JournalEntry> entries() const;
  std::size_t size() const;

 private:
  Verbosity verbosity_;
  mutable std::mutex mu_;
  std::vector<JournalEntry> entries_;
  std::optional<std::ofstream> file_;
};

nlohmann::json to_json(const JournalEntry& e);

// Wraps any backend and journals one entry per invoke().
class JournalingBackend final : public Backend {
 public:
  JournalingBackend(Backend& inner, std::shared_ptr<RequestJournal> journal)
      : inner_(inner), journal_(std::move(journal)) {}

  BackendResponse invoke(const BackendRequest& req) override;
  std::size_t max_parallel() const override { return inner_.max_parallel(); }

 private:
  Backend& inner_;
  std::shared_ptr<RequestJournal> journal_;
};

// ---------------------------------------------------------------------------
// HTTP backend

// Body template and response locations. String values in `body` equal to a
// placeholder ("{{focus}}", "{{context}}", "{{capability}}", "{{style}}",
// "{{task}}", "{{budget}}") are replaced by the typed value; placeholders
// embedded in longer strings are substituted as text.
struct PayloadTemplate {
  nlohmann::json body;
  std::string text_pointer = "/text";
  std::string scores_pointer = "/scores";

  static PayloadTemplate default_template();
  static PayloadTemplate from_json(const nlohmann::json& j);
  static PayloadTemplate load(const std::filesystem::path& path);

  nlohmann::json render(const BackendRequest& req) const;
};

struct BackendPolicy {
  std::size_t max_parallel = 4;
  std::int64_t timeout_ms = 30000;
  int retries = 2;
  std::int64_t backoff_base_ms = 500;
  std::string endpoint;
  std::string auth_token_env_var = "RECAP_BACKEND_TOKEN";
  PayloadTemplate payload = PayloadTemplate::default_template();

  void validate() const;
};

// Counting semaphore whose capacity is chosen at runtime.
class ConcurrencyLimit {
 public:
  explicit ConcurrencyLimit(std::size_t capacity) : available_(capacity) {}

  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t available_;
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendPolicy policy,
                       std::shared_ptr<RequestJournal> journal = nullptr);
  ~HttpBackend() override;

  BackendResponse invoke(const BackendRequest& req) override;
  std::size_t max_parallel() const override { return policy_.max_parallel; }

  const BackendPolicy& policy() const { return policy_; }

 private:
  struct Endpoint {
    std::string scheme_host_port;
    std::string path;
  };

  BackendResponse parse_response(const BackendRequest& req,
                                 std::string_view body) const;
  void journal(const BackendRequest& req, int attempt, std::string outcome);

  BackendPolicy policy_;
  Endpoint endpoint_;
  std::optional<std::string> token_;
  std::shared_ptr<RequestJournal> journal_;
  ConcurrencyLimit limit_;
};

std::int64_t now_ms();

}  // namespace recap
