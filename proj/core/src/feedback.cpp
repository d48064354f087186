#include "recap/feedback.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include <fmt/format.h>

#include "json_types.hpp"
#include "recap/chapters.hpp"
#include "recap/error.hpp"
#include "recap/text.hpp"

namespace recap {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<Action, std::string_view>, 14> kActionNames = {{
    {Action::kAddNote, "add_note"},
    {Action::kEditNote, "edit_note"},
    {Action::kDeleteNote, "delete_note"},
    {Action::kMarkImportant, "mark_important"},
    {Action::kUnmarkImportant, "unmark_important"},
    {Action::kAssignTask, "assign_task"},
    {Action::kSetDueDate, "set_due_date"},
    {Action::kReorderNote, "reorder_note"},
    {Action::kEditChapterTitle, "edit_chapter_title"},
    {Action::kEditRollingNote, "edit_rolling_note"},
    {Action::kCollapseChapter, "collapse_chapter"},
    {Action::kExpandChapter, "expand_chapter"},
    {Action::kExpandContext, "expand_context"},
    {Action::kShare, "share"},
}};

constexpr std::size_t kDefaultDisplayRadius = 3;

[[noreturn]] void invalid(const std::string& msg) {
  throw Error(ErrorCode::kValidationFailure, msg);
}

[[noreturn]] void illegal(const std::string& msg) {
  throw Error(ErrorCode::kIllegalAction, msg);
}

std::string require_text(const std::optional<std::string>& s, const char* field) {
  if (!s || text::trim(*s).empty()) invalid(fmt::format("payload.{} is required", field));
  return std::string(text::trim(*s));
}

const Note& require_note(const RecapDocument& doc, const EventPayload& p) {
  if (!p.note_id) invalid("payload.note_id is required");
  const auto* n = doc.highlights.find(*p.note_id);
  if (n == nullptr) {
    throw Error(ErrorCode::kNodeNotFound, fmt::format("no note '{}'", *p.note_id));
  }
  if (!n->visible()) illegal(fmt::format("note '{}' is deleted", *p.note_id));
  return *n;
}

const Chapter& require_chapter(const RecapDocument& doc, const EventPayload& p) {
  if (!p.chapter_id) invalid("payload.chapter_id is required");
  const auto* c = doc.find_chapter(*p.chapter_id);
  if (c == nullptr) {
    throw Error(ErrorCode::kNodeNotFound, fmt::format("no chapter '{}'", *p.chapter_id));
  }
  return *c;
}

const RollingNote& require_rolling(const RecapDocument& doc, const EventPayload& p) {
  const auto& ch = require_chapter(doc, p);
  if (!p.rolling_index) invalid("payload.rolling_index is required");
  if (*p.rolling_index >= ch.rolling_notes.size()) {
    throw Error(ErrorCode::kNodeNotFound,
                fmt::format("chapter '{}' has no rolling note {}", ch.chapter_id,
                            *p.rolling_index));
  }
  return ch.rolling_notes[*p.rolling_index];
}

void require_action_item(const Note& n, Action a) {
  if (n.kind != NoteKind::kActionItem) {
    illegal(fmt::format("{} applies to action items only", to_string(a)));
  }
}

std::size_t display_radius(const RecapDocument& doc) {
  const auto& cfg = doc.pipeline_config;
  if (cfg.is_object() && cfg.contains("highlights") && cfg["highlights"].is_object()) {
    const auto& h = cfg["highlights"];
    auto it = h.find("display_context_utterances");
    if (it != h.end() && it->is_number_unsigned()) return it->get<std::size_t>();
  }
  return kDefaultDisplayRadius;
}

std::string user_note_id(const FeedbackEvent& ev) { return "user-" + ev.event_id; }

// ---------------------------------------------------------------------------
// JSON helpers

template <typename T>
std::optional<T> opt(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!detail::json_holds<T>(*it)) throw SchemaViolation(path + "." + key, "wrong type");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw SchemaViolation(path + "." + key, "wrong type");
  }
}

template <typename T>
T req(const json& j, const char* key, const std::string& path) {
  auto v = opt<T>(j, key, path);
  if (!v) throw SchemaViolation(path + "." + key, "required field missing");
  return *v;
}

template <typename Fn>
auto convert(const std::string& s, const std::string& path, Fn&& fn) {
  try {
    return fn(s);
  } catch (const Error& e) {
    throw SchemaViolation(path, e.what());
  }
}

json payload_json(const EventPayload& p) {
  json j = json::object();
  if (p.note_id) j["note_id"] = *p.note_id;
  if (p.chapter_id) j["chapter_id"] = *p.chapter_id;
  if (p.rolling_index) j["rolling_index"] = *p.rolling_index;
  if (p.kind) j["kind"] = std::string(to_string(*p.kind));
  if (p.summary) j["summary"] = *p.summary;
  if (p.title) j["title"] = *p.title;
  if (p.assignee) j["assignee"] = *p.assignee;
  if (p.due_date) j["due_date"] = p.due_date->to_string();
  if (p.position) j["position"] = *p.position;
  if (p.anchor_index) j["anchor_index"] = *p.anchor_index;
  if (p.depth) j["depth"] = std::string(to_string(*p.depth));
  return j;
}

EventPayload payload_from_json(const json& j) {
  const std::string path = ".payload";
  if (!j.is_object()) throw SchemaViolation(path, "expected an object");
  EventPayload p;
  p.note_id = opt<std::string>(j, "note_id", path);
  p.chapter_id = opt<std::string>(j, "chapter_id", path);
  p.rolling_index = opt<std::size_t>(j, "rolling_index", path);
  if (auto k = opt<std::string>(j, "kind", path)) {
    p.kind = convert(*k, path + ".kind", [](const auto& s) { return note_kind_from_string(s); });
  }
  p.summary = opt<std::string>(j, "summary", path);
  p.title = opt<std::string>(j, "title", path);
  p.assignee = opt<std::string>(j, "assignee", path);
  if (auto d = opt<std::string>(j, "due_date", path)) {
    p.due_date = convert(*d, path + ".due_date", [](const auto& s) { return CalendarDate::parse(s); });
  }
  p.position = opt<std::size_t>(j, "position", path);
  p.anchor_index = opt<std::size_t>(j, "anchor_index", path);
  if (auto d = opt<std::string>(j, "depth", path)) {
    p.depth = convert(*d, path + ".depth", [](const auto& s) { return share_depth_from_string(s); });
  }
  return p;
}

std::string note_context(const Note& n, const Transcript* t) {
  if (t == nullptr || n.context.last >= t->size()) return {};
  return render_span(*t, n.context, true);
}

std::string span_context(const UtteranceSpan& s, const Transcript* t) {
  if (t == nullptr || s.last >= t->size()) return {};
  return render_span(*t, s, true);
}

}  // namespace

std::string_view to_string(Action a) {
  for (const auto& [action, name] : kActionNames) {
    if (action == a) return name;
  }
  return "unknown";
}

Action action_from_string(std::string_view s) {
  for (const auto& [action, name] : kActionNames) {
    if (name == s) return action;
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown action '{}'", s));
}

json to_json(const FeedbackEvent& ev) {
  json j = {{"event_id", ev.event_id},
            {"meeting_id", ev.meeting_id},
            {"actor", ev.actor},
            {"at_ms", ev.at_ms},
            {"base_version", ev.base_version},
            {"action", std::string(to_string(ev.action))},
            {"payload", payload_json(ev.payload)}};
  if (ev.delete_reason) j["delete_reason"] = std::string(to_string(*ev.delete_reason));
  return j;
}

FeedbackEvent event_from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation(".", "expected an object");
  FeedbackEvent ev;
  ev.event_id = req<std::string>(j, "event_id", "");
  ev.meeting_id = req<std::string>(j, "meeting_id", "");
  ev.actor = req<std::string>(j, "actor", "");
  ev.at_ms = opt<std::int64_t>(j, "at_ms", "").value_or(0);
  ev.base_version = req<std::uint64_t>(j, "base_version", "");
  ev.action = convert(req<std::string>(j, "action", ""), ".action",
                      [](const auto& s) { return action_from_string(s); });
  if (auto it = j.find("payload"); it != j.end()) ev.payload = payload_from_json(*it);
  if (auto r = opt<std::string>(j, "delete_reason", "")) {
    ev.delete_reason = convert(*r, ".delete_reason",
                               [](const auto& s) { return delete_reason_from_string(s); });
  }
  return ev;
}

void validate_event(const RecapDocument& doc, const FeedbackEvent& ev) {
  if (ev.base_version < doc.version) {
    throw Error(ErrorCode::kStaleVersion,
                fmt::format("event based on version {}, document is at {}",
                            ev.base_version, doc.version));
  }
  if (ev.base_version > doc.version) {
    invalid(fmt::format("event based on version {} ahead of document version {}",
                        ev.base_version, doc.version));
  }
  if (text::trim(ev.event_id).empty()) invalid("event_id is required");
  if (text::trim(ev.actor).empty()) invalid("actor is required");
  if (ev.meeting_id != doc.meeting_id) {
    invalid(fmt::format("event for meeting '{}' sent to '{}'", ev.meeting_id,
                        doc.meeting_id));
  }
  const auto& p = ev.payload;
  switch (ev.action) {
    case Action::kAddNote: {
      if (!p.kind) invalid("payload.kind is required");
      require_text(p.summary, "summary");
      if (!p.anchor_index) invalid("payload.anchor_index is required");
      if (*p.anchor_index >= doc.transcript_length) {
        invalid(fmt::format("anchor {} outside transcript of {}", *p.anchor_index,
                            doc.transcript_length));
      }
      if (*p.kind == NoteKind::kKeyPoint && (p.assignee || p.due_date)) {
        illegal("key points carry no assignee or due date");
      }
      if (doc.highlights.find(user_note_id(ev)) != nullptr) {
        invalid(fmt::format("note '{}' already exists", user_note_id(ev)));
      }
      break;
    }
    case Action::kEditNote:
      require_note(doc, p);
      require_text(p.summary, "summary");
      break;
    case Action::kDeleteNote:
      if (p.rolling_index || (p.chapter_id && !p.note_id)) {
        illegal("chapters and rolling notes cannot be deleted");
      }
      require_note(doc, p);
      break;
    case Action::kMarkImportant:
    case Action::kUnmarkImportant:
    case Action::kExpandContext:
      require_note(doc, p);
      break;
    case Action::kAssignTask:
      require_action_item(require_note(doc, p), ev.action);
      require_text(p.assignee, "assignee");
      break;
    case Action::kSetDueDate:
      require_action_item(require_note(doc, p), ev.action);
      if (!p.due_date) invalid("payload.due_date is required");
      break;
    case Action::kReorderNote:
      require_note(doc, p);
      if (!p.position) invalid("payload.position is required");
      break;
    case Action::kEditChapterTitle:
      require_chapter(doc, p);
      require_text(p.title, "title");
      break;
    case Action::kEditRollingNote:
      require_rolling(doc, p);
      require_text(p.summary, "summary");
      break;
    case Action::kCollapseChapter:
    case Action::kExpandChapter:
      require_chapter(doc, p);
      break;
    case Action::kShare:
      if (p.note_id.has_value() == p.chapter_id.has_value()) {
        invalid("share needs exactly one of payload.note_id or payload.chapter_id");
      }
      if (p.note_id) {
        require_note(doc, p);
      } else {
        require_chapter(doc, p);
      }
      break;
  }
}

RecapDocument apply(const RecapDocument& doc, const FeedbackEvent& ev) {
  validate_event(doc, ev);
  RecapDocument out = doc;
  out.version = doc.version + 1;
  const auto& p = ev.payload;
  bool markers_dirty = false;
  switch (ev.action) {
    case Action::kAddNote: {
      Note n;
      n.note_id = user_note_id(ev);
      n.kind = *p.kind;
      n.summary = require_text(p.summary, "summary");
      n.anchor = {*p.anchor_index, *p.anchor_index};
      const auto radius = display_radius(doc);
      n.context = {n.anchor.first - std::min(n.anchor.first, radius),
                   std::min(n.anchor.last + radius, doc.transcript_length - 1)};
      if (p.assignee) n.assignee = std::string(text::trim(*p.assignee));
      n.due_date = p.due_date;
      n.origin = Origin::kUser;
      auto& lst = out.highlights.list(n.kind);
      n.position = lst.size();
      lst.push_back(std::move(n));
      markers_dirty = true;
      break;
    }
    case Action::kEditNote: {
      auto* n = out.highlights.find(*p.note_id);
      n->summary = require_text(p.summary, "summary");
      n->origin = Origin::kUser;
      break;
    }
    case Action::kDeleteNote:
      out.highlights.find(*p.note_id)->deleted =
          Tombstone{ev.event_id, ev.actor, ev.at_ms,
                    ev.delete_reason.value_or(DeleteReason::kUnspecified)};
      markers_dirty = true;
      break;
    case Action::kMarkImportant:
    case Action::kUnmarkImportant:
      out.highlights.find(*p.note_id)->marked = ev.action == Action::kMarkImportant;
      markers_dirty = true;
      break;
    case Action::kAssignTask:
      out.highlights.find(*p.note_id)->assignee = std::string(text::trim(*p.assignee));
      break;
    case Action::kSetDueDate:
      out.highlights.find(*p.note_id)->due_date = p.due_date;
      break;
    case Action::kReorderNote: {
      auto& lst = out.highlights.list(out.highlights.find(*p.note_id)->kind);
      auto it = std::find_if(lst.begin(), lst.end(),
                             [&](const Note& n) { return n.note_id == *p.note_id; });
      Note moved = std::move(*it);
      lst.erase(it);
      const auto at = std::min(*p.position, lst.size());
      lst.insert(lst.begin() + static_cast<std::ptrdiff_t>(at), std::move(moved));
      for (std::size_t i = 0; i < lst.size(); ++i) lst[i].position = i;
      markers_dirty = true;
      break;
    }
    case Action::kEditChapterTitle:
      out.find_chapter(*p.chapter_id)->title = require_text(p.title, "title");
      break;
    case Action::kEditRollingNote: {
      auto& rn = out.find_chapter(*p.chapter_id)->rolling_notes[*p.rolling_index];
      rn.summary = require_text(p.summary, "summary");
      rn.origin = Origin::kUser;
      break;
    }
    case Action::kCollapseChapter:
    case Action::kExpandChapter:
      out.find_chapter(*p.chapter_id)->collapsed = ev.action == Action::kCollapseChapter;
      break;
    case Action::kExpandContext:
    case Action::kShare:
      break;
  }
  if (markers_dirty) refresh_markers(out.chapters, out.highlights);
  return out;
}

// ---------------------------------------------------------------------------
// Logs

std::size_t MemoryEventLog::append(const FeedbackEvent& ev) {
  std::lock_guard lock(mu_);
  events_.push_back(ev);
  return events_.size() - 1;
}

std::vector<FeedbackEvent> MemoryEventLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t MemoryEventLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::vector<FeedbackEvent> read_event_lines(std::istream& in) {
  std::vector<FeedbackEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kMalformedInput,
                  fmt::format("event line {}: {}", lineno, e.what()));
    }
    try {
      out.push_back(event_from_json(j));
    } catch (const SchemaViolation& e) {
      throw Error(ErrorCode::kMalformedInput, fmt::format("event line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

FileEventLog::FileEventLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    events_ = read_event_lines(in);
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path_.string()));
}

std::size_t FileEventLog::append(const FeedbackEvent& ev) {
  std::lock_guard lock(mu_);
  out_ << to_json(ev).dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIo, fmt::format("write to {} failed", path_.string()));
  events_.push_back(ev);
  return events_.size() - 1;
}

std::vector<FeedbackEvent> FileEventLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t FileEventLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

RecordResult record(EventLog& log, const RecapDocument& head, FeedbackEvent ev) {
  if (ev.action == Action::kDeleteNote && !ev.delete_reason) {
    ev.delete_reason = DeleteReason::kUnspecified;
  }
  if (head.version != log.size() + 1) {
    throw Error(ErrorCode::kValidationFailure,
                fmt::format("head version {} does not follow {} recorded events",
                            head.version, log.size()));
  }
  auto next = apply(head, ev);
  const auto pos = log.append(ev);
  return {pos, std::move(next)};
}

RecapDocument replay(const RecapDocument& initial, std::span<const FeedbackEvent> events) {
  RecapDocument doc = initial;
  for (const auto& ev : events) doc = apply(doc, ev);
  return doc;
}

std::vector<RecapDocument> replay_history(const RecapDocument& initial,
                                          std::span<const FeedbackEvent> events) {
  std::vector<RecapDocument> out;
  out.reserve(events.size() + 1);
  out.push_back(initial);
  for (const auto& ev : events) out.push_back(apply(out.back(), ev));
  return out;
}

// ---------------------------------------------------------------------------
// Training export

std::string_view to_string(Signal s) {
  switch (s) {
    case Signal::kPositiveRelevance: return "positive_relevance";
    case Signal::kQualityImprovement: return "quality_improvement";
    case Signal::kAmbiguousNegative: return "ambiguous_negative";
    case Signal::kNavigationRelevance: return "navigation_relevance";
  }
  return "positive_relevance";
}

Signal signal_from_string(std::string_view s) {
  for (auto sig : {Signal::kPositiveRelevance, Signal::kQualityImprovement,
                   Signal::kAmbiguousNegative, Signal::kNavigationRelevance}) {
    if (s == to_string(sig)) return sig;
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown signal '{}'", s));
}

void TrainingWeights::validate() const {
  for (double w : {edit, add, share, navigation, ambiguous_negative}) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("weight {} outside [0,1]", w));
    }
  }
  if (ambiguous_negative > kMaxAmbiguousNegativeWeight) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("ambiguous negative weight {} exceeds {}", ambiguous_negative,
                            kMaxAmbiguousNegativeWeight));
  }
}

json to_json(const TrainingExample& ex) {
  json j = {{"schema_version", kTrainingSchemaVersion},
            {"signal", std::string(to_string(ex.signal))},
            {"context_text", ex.context_text},
            {"original_summary", ex.original_summary},
            {"weight", ex.weight},
            {"provenance", ex.provenance}};
  if (ex.target) j["target"] = *ex.target;
  return j;
}

TrainingExample training_example_from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation(".", "expected an object");
  if (req<int>(j, "schema_version", "") != kTrainingSchemaVersion) {
    throw SchemaViolation(".schema_version", "unsupported schema version");
  }
  TrainingExample ex;
  ex.signal = convert(req<std::string>(j, "signal", ""), ".signal",
                      [](const auto& s) { return signal_from_string(s); });
  ex.context_text = req<std::string>(j, "context_text", "");
  ex.original_summary = req<std::string>(j, "original_summary", "");
  ex.target = opt<std::string>(j, "target", "");
  ex.weight = req<double>(j, "weight", "");
  ex.provenance = req<std::string>(j, "provenance", "");
  return ex;
}

std::vector<TrainingExample> export_training(std::span<const FeedbackEvent> log,
                                             std::span<const RecapDocument> history,
                                             const Transcript* t,
                                             const TrainingWeights& weights) {
  weights.validate();
  if (history.size() < log.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("{} events but only {} documents", log.size(), history.size()));
  }
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& ev = log[i];
    const auto& before = history[i];
    const auto& p = ev.payload;
    auto note_example = [&](Signal sig, double weight) {
      const auto* n = p.note_id ? before.highlights.find(*p.note_id) : nullptr;
      if (n == nullptr) return;
      out.push_back({sig, note_context(*n, t), n->summary, std::nullopt, weight, ev.event_id});
    };
    auto chapter_example = [&](Signal sig, double weight) {
      const auto* c = p.chapter_id ? before.find_chapter(*p.chapter_id) : nullptr;
      if (c == nullptr) return;
      out.push_back({sig, span_context(c->range, t), c->one_liner, std::nullopt, weight,
                     ev.event_id});
    };
    switch (ev.action) {
      case Action::kEditNote: {
        const auto* n = p.note_id ? before.highlights.find(*p.note_id) : nullptr;
        if (n == nullptr || !p.summary) break;
        out.push_back({Signal::kQualityImprovement, note_context(*n, t), n->summary,
                       std::string(text::trim(*p.summary)), weights.edit, ev.event_id});
        break;
      }
      case Action::kEditRollingNote: {
        const auto* c = p.chapter_id ? before.find_chapter(*p.chapter_id) : nullptr;
        if (c == nullptr || !p.rolling_index || *p.rolling_index >= c->rolling_notes.size() ||
            !p.summary) {
          break;
        }
        const auto& rn = c->rolling_notes[*p.rolling_index];
        out.push_back({Signal::kQualityImprovement, span_context(rn.span, t), rn.summary,
                       std::string(text::trim(*p.summary)), weights.edit, ev.event_id});
        break;
      }
      case Action::kAddNote: {
        if (!p.summary || !p.anchor_index) break;
        const auto radius = display_radius(before);
        const auto a = *p.anchor_index;
        const UtteranceSpan ctx{a - std::min(a, radius),
                                std::min(a + radius, before.transcript_length - 1)};
        out.push_back({Signal::kPositiveRelevance, span_context(ctx, t),
                       std::string(text::trim(*p.summary)), std::nullopt, weights.add,
                       ev.event_id});
        break;
      }
      case Action::kShare:
        if (p.note_id) {
          note_example(Signal::kPositiveRelevance, weights.share);
        } else {
          chapter_example(Signal::kPositiveRelevance, weights.share);
        }
        break;
      case Action::kExpandContext:
        note_example(Signal::kNavigationRelevance, weights.navigation);
        break;
      case Action::kExpandChapter:
        chapter_example(Signal::kNavigationRelevance, weights.navigation);
        break;
      case Action::kDeleteNote: {
        const auto reason = ev.delete_reason.value_or(DeleteReason::kUnspecified);
        if (reason == DeleteReason::kInaccurate || reason == DeleteReason::kIrrelevant) {
          note_example(Signal::kAmbiguousNegative, weights.ambiguous_negative);
        }
        break;
      }
      default:
        break;
    }
  }
  return out;
}

std::string training_to_jsonl(std::span<const TrainingExample> examples) {
  std::string out;
  for (const auto& ex : examples) out += to_json(ex).dump() + "\n";
  return out;
}

}  // namespace recap
