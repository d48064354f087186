#include "recap/service/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "recap/error.hpp"
#include "recap/log.hpp"

namespace recap::service {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, std::string_view bytes) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", tmp.string()));
  }
  fs::rename(tmp, p);
}

[[noreturn]] void unknown(const std::string& id) {
  throw Error(ErrorCode::kNotFound, fmt::format("no meeting '{}'", id));
}

}  // namespace

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::kPending: return "pending";
    case JobStatus::kRunning: return "running";
    case JobStatus::kReady: return "ready";
    case JobStatus::kFailed: return "failed";
  }
  return "pending";
}

JobStatus job_status_from_string(std::string_view s) {
  for (auto st : {JobStatus::kPending, JobStatus::kRunning, JobStatus::kReady,
                  JobStatus::kFailed}) {
    if (s == to_string(st)) return st;
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown job status '{}'", s));
}

json to_json(const MeetingMeta& m) {
  return {{"meeting_id", m.meeting_id},
          {"owner", m.owner},
          {"owner_token_sha256", m.owner_token_sha256},
          {"created_at_ms", m.created_at_ms},
          {"utterance_count", m.utterance_count},
          {"status", std::string(to_string(m.status))},
          {"error", m.error}};
}

MeetingMeta meeting_meta_from_json(const json& j) {
  try {
    MeetingMeta m;
    m.meeting_id = j.at("meeting_id").get<std::string>();
    m.owner = j.at("owner").get<std::string>();
    m.owner_token_sha256 = j.at("owner_token_sha256").get<std::string>();
    m.created_at_ms = j.at("created_at_ms").get<std::int64_t>();
    m.utterance_count = j.at("utterance_count").get<std::size_t>();
    m.status = job_status_from_string(j.at("status").get<std::string>());
    m.error = j.value("error", "");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, fmt::format("bad meeting metadata: {}", e.what()));
  }
}

bool valid_meeting_id(std::string_view id) {
  return !id.empty() && id.size() <= 128 &&
         std::all_of(id.begin(), id.end(), [](char c) {
           return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '-' || c == '_';
         });
}

// ---------------------------------------------------------------------------
// InMemoryStore

InMemoryStore::Entry& InMemoryStore::entry(const std::string& id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) unknown(id);
  return it->second;
}

bool InMemoryStore::create(const MeetingMeta& meta, const Transcript& t) {
  std::lock_guard lock(mu_);
  if (entries_.contains(meta.meeting_id)) return false;
  Entry e;
  e.meta = meta;
  e.transcript = t;
  entries_.emplace(meta.meeting_id, std::move(e));
  return true;
}

std::optional<MeetingMeta> InMemoryStore::meta(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.meta;
}

void InMemoryStore::put_meta(const MeetingMeta& meta) {
  std::lock_guard lock(mu_);
  entry(meta.meeting_id).meta = meta;
}

std::optional<Transcript> InMemoryStore::transcript(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.transcript;
}

void InMemoryStore::put_initial(const std::string& id, const RecapDocument& doc) {
  std::lock_guard lock(mu_);
  auto& e = entry(id);
  e.initial = doc;
  e.head = doc;
}

std::optional<RecapDocument> InMemoryStore::initial(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.initial;
}

std::optional<RecapDocument> InMemoryStore::head(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.head;
}

void InMemoryStore::put_head(const std::string& id, const RecapDocument& doc) {
  std::lock_guard lock(mu_);
  entry(id).head = doc;
}

EventLog& InMemoryStore::events(const std::string& id) {
  std::lock_guard lock(mu_);
  return *entry(id).log;
}

std::vector<std::string> InMemoryStore::list() {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// FileStore

FileStore::FileStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                fmt::format("cannot create data dir {}: {}", root_.string(), ec.message()));
  }
}

fs::path FileStore::dir(const std::string& id) const {
  if (!valid_meeting_id(id)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("invalid meeting id '{}'", id));
  }
  return root_ / id;
}

FileStore::Loaded* FileStore::load(const std::string& id) {
  if (auto it = cache_.find(id); it != cache_.end()) return &it->second;
  if (!valid_meeting_id(id)) return nullptr;
  const auto d = root_ / id;
  if (!fs::exists(d / "meta.json")) return nullptr;
  Loaded l;
  l.meta = meeting_meta_from_json(json::parse(read_file(d / "meta.json")));
  l.log = std::make_unique<FileEventLog>(d / "events.jsonl");
  if (fs::exists(d / "initial.json")) l.initial = from_portable(read_file(d / "initial.json"));
  if (fs::exists(d / "head.json")) l.head = from_portable(read_file(d / "head.json"));
  if (l.meta.status == JobStatus::kPending || l.meta.status == JobStatus::kRunning) {
    l.meta.status = JobStatus::kFailed;
    l.meta.error = "interrupted before the recap was ready";
    write_atomic(d / "meta.json", to_json(l.meta).dump());
  }
  if (l.initial && (!l.head || l.head->version != l.log->size() + 1)) {
    logger().warn("meeting {}: head disagrees with {} logged events, replaying", id,
                  l.log->size());
    const auto events = l.log->events();
    l.head = replay(*l.initial, events);
    write_atomic(d / "head.json", to_portable(*l.head));
  }
  return &cache_.emplace(id, std::move(l)).first->second;
}

bool FileStore::create(const MeetingMeta& meta, const Transcript& t) {
  std::lock_guard lock(mu_);
  const auto d = dir(meta.meeting_id);
  if (cache_.contains(meta.meeting_id) || fs::exists(d)) return false;
  fs::create_directories(d);
  write_atomic(d / "transcript.json", to_canonical(t));
  write_atomic(d / "meta.json", to_json(meta).dump());
  Loaded l;
  l.meta = meta;
  l.log = std::make_unique<FileEventLog>(d / "events.jsonl");
  cache_.emplace(meta.meeting_id, std::move(l));
  return true;
}

std::optional<MeetingMeta> FileStore::meta(const std::string& id) {
  std::lock_guard lock(mu_);
  auto* l = load(id);
  if (l == nullptr) return std::nullopt;
  return l->meta;
}

void FileStore::put_meta(const MeetingMeta& meta) {
  std::lock_guard lock(mu_);
  auto* l = load(meta.meeting_id);
  if (l == nullptr) unknown(meta.meeting_id);
  write_atomic(dir(meta.meeting_id) / "meta.json", to_json(meta).dump());
  l->meta = meta;
}

std::optional<Transcript> FileStore::transcript(const std::string& id) {
  std::lock_guard lock(mu_);
  if (load(id) == nullptr) return std::nullopt;
  return transcript_from_canonical(read_file(dir(id) / "transcript.json"), id);
}

void FileStore::put_initial(const std::string& id, const RecapDocument& doc) {
  std::lock_guard lock(mu_);
  auto* l = load(id);
  if (l == nullptr) unknown(id);
  const auto bytes = to_portable(doc);
  write_atomic(dir(id) / "initial.json", bytes);
  write_atomic(dir(id) / "head.json", bytes);
  l->initial = doc;
  l->head = doc;
}

std::optional<RecapDocument> FileStore::initial(const std::string& id) {
  std::lock_guard lock(mu_);
  auto* l = load(id);
  if (l == nullptr) return std::nullopt;
  return l->initial;
}

std::optional<RecapDocument> FileStore::head(const std::string& id) {
  std::lock_guard lock(mu_);
  auto* l = load(id);
  if (l == nullptr) return std::nullopt;
  return l->head;
}

void FileStore::put_head(const std::string& id, const RecapDocument& doc) {
  std::lock_guard lock(mu_);
  auto* l = load(id);
  if (l == nullptr) unknown(id);
  write_atomic(dir(id) / "head.json", to_portable(doc));
  l->head = doc;
}

EventLog& FileStore::events(const std::string& id) {
  std::lock_guard lock(mu_);
  auto* l = load(id);
  if (l == nullptr) unknown(id);
  return *l->log;
}

std::vector<std::string> FileStore::list() {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(root_)) {
    const auto name = e.path().filename().string();
    if (e.is_directory() && valid_meeting_id(name) && fs::exists(e.path() / "meta.json")) {
      out.push_back(name);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace recap::service
