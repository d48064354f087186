#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "recap/feedback.hpp"
#include "recap/recapdoc.hpp"
#include "recap/transcript.hpp"

namespace recap::service {

enum class JobStatus { kPending, kRunning, kReady, kFailed };

std::string_view to_string(JobStatus s);
JobStatus job_status_from_string(std::string_view s);

struct MeetingMeta {
  std::string meeting_id;
  std::string owner;
  std::string owner_token_sha256;
  std::int64_t created_at_ms = 0;
  std::size_t utterance_count = 0;
  JobStatus status = JobStatus::kPending;
  std::string error;  // kFailed only

  bool operator==(const MeetingMeta&) const = default;
};

nlohmann::json to_json(const MeetingMeta& m);
MeetingMeta meeting_meta_from_json(const nlohmann::json& j);

// Persistence for meetings. Implementations are thread-safe; the service
// still serializes writes per meeting.
class MeetingStore {
 public:
  virtual ~MeetingStore() = default;

  // False when the id is taken.
  virtual bool create(const MeetingMeta& meta, const Transcript& t) = 0;
  virtual std::optional<MeetingMeta> meta(const std::string& id) = 0;
  virtual void put_meta(const MeetingMeta& meta) = 0;
  virtual std::optional<Transcript> transcript(const std::string& id) = 0;

  // Stores the pipeline output; it is also the head until events arrive.
  virtual void put_initial(const std::string& id, const RecapDocument& doc) = 0;
  virtual std::optional<RecapDocument> initial(const std::string& id) = 0;
  virtual std::optional<RecapDocument> head(const std::string& id) = 0;
  virtual void put_head(const std::string& id, const RecapDocument& doc) = 0;

  // Throws kNotFound for an unknown meeting.
  virtual EventLog& events(const std::string& id) = 0;

  virtual std::vector<std::string> list() = 0;
};

class InMemoryStore final : public MeetingStore {
 public:
  bool create(const MeetingMeta& meta, const Transcript& t) override;
  std::optional<MeetingMeta> meta(const std::string& id) override;
  void put_meta(const MeetingMeta& meta) override;
  std::optional<Transcript> transcript(const std::string& id) override;
  void put_initial(const std::string& id, const RecapDocument& doc) override;
  std::optional<RecapDocument> initial(const std::string& id) override;
  std::optional<RecapDocument> head(const std::string& id) override;
  void put_head(const std::string& id, const RecapDocument& doc) override;
  EventLog& events(const std::string& id) override;
  std::vector<std::string> list() override;

 private:
  struct Entry {
    MeetingMeta meta;
    Transcript transcript;
    std::optional<RecapDocument> initial;
    std::optional<RecapDocument> head;
    std::unique_ptr<MemoryEventLog> log = std::make_unique<MemoryEventLog>();
  };

  Entry& entry(const std::string& id);

  std::mutex mu_;
  std::map<std::string, Entry> entries_;
};

// One directory per meeting under `root`:
//   meta.json, transcript.json (canonical form), initial.json, head.json,
//   events.jsonl (append-only).
// Documents are written to a temporary file and renamed into place. A head
// that disagrees with the event log is rebuilt by replay on load.
class FileStore final : public MeetingStore {
 public:
  explicit FileStore(std::filesystem::path root);

  bool create(const MeetingMeta& meta, const Transcript& t) override;
  std::optional<MeetingMeta> meta(const std::string& id) override;
  void put_meta(const MeetingMeta& meta) override;
  std::optional<Transcript> transcript(const std::string& id) override;
  void put_initial(const std::string& id, const RecapDocument& doc) override;
  std::optional<RecapDocument> initial(const std::string& id) override;
  std::optional<RecapDocument> head(const std::string& id) override;
  void put_head(const std::string& id, const RecapDocument& doc) override;
  EventLog& events(const std::string& id) override;
  std::vector<std::string> list() override;

  const std::filesystem::path& root() const { return root_; }

 private:
  struct Loaded {
    MeetingMeta meta;
    std::optional<RecapDocument> initial;
    std::optional<RecapDocument> head;
    std::unique_ptr<FileEventLog> log;
  };

  std::filesystem::path dir(const std::string& id) const;
  Loaded* load(const std::string& id);

  std::filesystem::path root_;
  std::mutex mu_;
  std::map<std::string, Loaded> cache_;
};

// Meeting ids are used as directory names; only [A-Za-z0-9_-] is accepted.
bool valid_meeting_id(std::string_view id);

}  // namespace recap::service
