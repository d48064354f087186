#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "recap/backend.hpp"
#include "recap/config.hpp"
#include "recap/feedback.hpp"
#include "recap/recapdoc.hpp"
#include "recap/service/store.hpp"

namespace recap::service {

struct IngestResult {
  std::string meeting_id;
  std::string owner_token;  // returned once; only its hash is stored
  JobStatus status = JobStatus::kReady;
  std::uint64_t version = 0;  // 0 while a job is pending
};

struct MeetingStatus {
  std::string meeting_id;
  JobStatus status = JobStatus::kPending;
  std::uint64_t version = 0;
  std::size_t event_count = 0;
  std::string error;
};

struct EventResult {
  std::uint64_t new_version = 0;
  std::size_t position = 0;
};

// Transport-independent service core. Pipeline runs inline below the
// configured utterance cutoff and on a background job otherwise. Event
// application is serialized per meeting.
class Service {
 public:
  using Clock = std::function<std::int64_t()>;

  Service(AppConfig cfg, std::shared_ptr<MeetingStore> store,
          std::shared_ptr<Backend> backend, Clock clock = now_ms);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Throws kTooLarge, kMalformedInput, kEmptyTranscript; a backend failure
  // on the inline path surfaces as BackendFailure.
  IngestResult ingest(std::string_view body, std::optional<SourceFormat> format,
                      std::string owner);

  // Throws kNotFound.
  MeetingStatus status(const std::string& id);
  // Throws kNotFound, or kNotReady while the pipeline has not finished.
  RecapDocument recap(const std::string& id);

  // Throws kNotFound, kNotReady, kStaleVersion, kValidationFailure,
  // kNodeNotFound, kIllegalAction.
  EventResult post_event(const std::string& id, FeedbackEvent ev);

  // Context text is included only for the meeting owner.
  std::string export_training(const std::string& id, bool include_context);
  std::string export_markdown(const std::string& id, View view);
  ShareExtract share(const std::string& id, std::string_view node, ShareDepth depth,
                     bool include_transcript);

  // Throws kForbidden unless `owner_token` matches.
  Transcript transcript(const std::string& id, std::string_view owner_token);
  bool is_owner(const std::string& id, std::string_view owner_token);

  // Blocks until every background job has finished.
  void wait_idle();

  const AppConfig& config() const { return cfg_; }

 private:
  std::mutex& meeting_mutex(const std::string& id);
  MeetingMeta require_meta(const std::string& id);
  RecapDocument require_head(const std::string& id);
  void run_job(std::string id, Transcript t);

  AppConfig cfg_;
  std::shared_ptr<MeetingStore> store_;
  std::shared_ptr<Backend> backend_;
  Clock clock_;

  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;

  std::mutex jobs_mu_;
  std::vector<std::jthread> jobs_;
};

std::string random_hex(std::size_t bytes);

}  // namespace recap::service
