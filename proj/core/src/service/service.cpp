#include "recap/service/service.hpp"

#include <openssl/rand.h>

#include <fmt/format.h>

#include "recap/error.hpp"
#include "recap/hash.hpp"
#include "recap/log.hpp"
#include "recap/pipeline.hpp"

namespace recap::service {
namespace {

bool equal_constant_time(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  }
  return diff == 0;
}

}  // namespace

std::string random_hex(std::size_t bytes) {
  std::string raw(bytes, '\0');
  if (RAND_bytes(reinterpret_cast<unsigned char*>(raw.data()), static_cast<int>(bytes)) != 1) {
    throw Error(ErrorCode::kIo, "random source unavailable");
  }
  std::string out;
  out.reserve(bytes * 2);
  for (unsigned char c : raw) out += fmt::format("{:02x}", c);
  return out;
}

Service::Service(AppConfig cfg, std::shared_ptr<MeetingStore> store,
                 std::shared_ptr<Backend> backend, Clock clock)
    : cfg_(std::move(cfg)),
      store_(std::move(store)),
      backend_(std::move(backend)),
      clock_(std::move(clock)) {
  cfg_.pipeline.validate();
  cfg_.weights.validate();
}

Service::~Service() { wait_idle(); }

std::mutex& Service::meeting_mutex(const std::string& id) {
  std::lock_guard lock(locks_mu_);
  auto& m = locks_[id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

MeetingMeta Service::require_meta(const std::string& id) {
  auto meta = store_->meta(id);
  if (!meta) throw Error(ErrorCode::kNotFound, fmt::format("no meeting '{}'", id));
  return *meta;
}

RecapDocument Service::require_head(const std::string& id) {
  const auto meta = require_meta(id);
  if (meta.status != JobStatus::kReady) {
    throw Error(ErrorCode::kNotReady,
                fmt::format("meeting '{}' is {}", id, to_string(meta.status)));
  }
  auto head = store_->head(id);
  if (!head) throw Error(ErrorCode::kNotReady, fmt::format("meeting '{}' has no recap", id));
  return *head;
}

IngestResult Service::ingest(std::string_view body, std::optional<SourceFormat> format,
                             std::string owner) {
  if (body.size() > cfg_.max_body_bytes) {
    throw Error(ErrorCode::kTooLarge, fmt::format("body of {} bytes exceeds limit of {}",
                                                  body.size(), cfg_.max_body_bytes));
  }
  ParseOptions opts;
  opts.format_hint = format;
  opts.meeting_id = "mtg-" + random_hex(8);
  auto t = parse_transcript(body, opts);

  IngestResult result;
  result.meeting_id = t.meeting_id();
  result.owner_token = random_hex(16);
  MeetingMeta meta;
  meta.meeting_id = t.meeting_id();
  meta.owner = owner.empty() ? "anonymous" : std::move(owner);
  meta.owner_token_sha256 = sha256_hex(result.owner_token);
  meta.created_at_ms = clock_();
  meta.utterance_count = t.size();
  meta.status = JobStatus::kPending;
  if (!store_->create(meta, t)) {
    throw Error(ErrorCode::kIo, fmt::format("meeting id collision on {}", meta.meeting_id));
  }

  if (t.size() < cfg_.sync_cutoff_utterances) {
    std::lock_guard lock(meeting_mutex(meta.meeting_id));
    try {
      auto doc = run_pipeline(t, *backend_, cfg_.pipeline, meta.created_at_ms);
      store_->put_initial(meta.meeting_id, doc);
      meta.status = JobStatus::kReady;
      store_->put_meta(meta);
      result.status = JobStatus::kReady;
      result.version = doc.version;
    } catch (const std::exception& e) {
      meta.status = JobStatus::kFailed;
      meta.error = e.what();
      store_->put_meta(meta);
      throw;
    }
    return result;
  }

  result.status = JobStatus::kPending;
  std::lock_guard lock(jobs_mu_);
  jobs_.emplace_back([this, id = meta.meeting_id, t = std::move(t)]() mutable {
    run_job(std::move(id), std::move(t));
  });
  return result;
}

void Service::run_job(std::string id, Transcript t) {
  std::lock_guard lock(meeting_mutex(id));
  auto meta = require_meta(id);
  meta.status = JobStatus::kRunning;
  store_->put_meta(meta);
  try {
    auto doc = run_pipeline(t, *backend_, cfg_.pipeline, meta.created_at_ms);
    store_->put_initial(id, doc);
    meta.status = JobStatus::kReady;
    logger().info("meeting {} ready ({} utterances)", id, t.size());
  } catch (const std::exception& e) {
    meta.status = JobStatus::kFailed;
    meta.error = e.what();
    logger().error("meeting {} failed: {}", id, e.what());
  }
  store_->put_meta(meta);
}

void Service::wait_idle() {
  std::vector<std::jthread> jobs;
  {
    std::lock_guard lock(jobs_mu_);
    jobs.swap(jobs_);
  }
  for (auto& j : jobs) {
    if (j.joinable()) j.join();
  }
}

MeetingStatus Service::status(const std::string& id) {
  const auto meta = require_meta(id);
  MeetingStatus s;
  s.meeting_id = id;
  s.status = meta.status;
  s.error = meta.error;
  if (meta.status == JobStatus::kReady) {
    if (auto head = store_->head(id)) s.version = head->version;
    s.event_count = store_->events(id).size();
  }
  return s;
}

RecapDocument Service::recap(const std::string& id) { return require_head(id); }

EventResult Service::post_event(const std::string& id, FeedbackEvent ev) {
  require_head(id);
  if (ev.meeting_id.empty()) ev.meeting_id = id;
  if (ev.meeting_id != id) {
    throw Error(ErrorCode::kValidationFailure,
                fmt::format("event for meeting '{}' posted to '{}'", ev.meeting_id, id));
  }
  std::lock_guard lock(meeting_mutex(id));
  auto head = require_head(id);
  auto& log = store_->events(id);
  for (const auto& prior : log.events()) {
    if (prior.event_id == ev.event_id) {
      throw Error(ErrorCode::kValidationFailure,
                  fmt::format("event id '{}' already recorded", ev.event_id));
    }
  }
  auto result = record(log, head, std::move(ev));
  store_->put_head(id, result.document);
  return {result.document.version, result.position};
}

std::string Service::export_training(const std::string& id, bool include_context) {
  const auto initial = [&] {
    require_head(id);
    auto doc = store_->initial(id);
    if (!doc) throw Error(ErrorCode::kNotReady, fmt::format("meeting '{}' has no recap", id));
    return *doc;
  }();
  const auto events = store_->events(id).events();
  const auto history = replay_history(initial, events);
  std::optional<Transcript> t;
  if (include_context) t = store_->transcript(id);
  const auto examples = recap::export_training(events, history, t ? &*t : nullptr, cfg_.weights);
  return training_to_jsonl(examples);
}

std::string Service::export_markdown(const std::string& id, View view) {
  return render_markdown(require_head(id), view);
}

ShareExtract Service::share(const std::string& id, std::string_view node, ShareDepth depth,
                            bool include_transcript) {
  const auto head = require_head(id);
  std::optional<Transcript> t;
  if (include_transcript) t = store_->transcript(id);
  return share_extract(head, node, depth, t ? &*t : nullptr, {}, clock_());
}

bool Service::is_owner(const std::string& id, std::string_view owner_token) {
  const auto meta = require_meta(id);
  return !owner_token.empty() &&
         equal_constant_time(sha256_hex(owner_token), meta.owner_token_sha256);
}

Transcript Service::transcript(const std::string& id, std::string_view owner_token) {
  if (!is_owner(id, owner_token)) {
    throw Error(ErrorCode::kForbidden, "owner credential required for transcript text");
  }
  auto t = store_->transcript(id);
  if (!t) throw Error(ErrorCode::kNotFound, fmt::format("no meeting '{}'", id));
  return *t;
}

}  // namespace recap::service
