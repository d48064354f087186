#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recap/highlights.hpp"
#include "recap/recapdoc.hpp"
#include "recap/transcript.hpp"

namespace recap {

enum class Action {
  kAddNote,
  kEditNote,
  kDeleteNote,
  kMarkImportant,
  kUnmarkImportant,
  kAssignTask,
  kSetDueDate,
  kReorderNote,
  kEditChapterTitle,
  kEditRollingNote,
  kCollapseChapter,
  kExpandChapter,
  kExpandContext,
  kShare,
};

std::string_view to_string(Action a);
Action action_from_string(std::string_view s);

// Action-specific fields; which ones are required depends on the action.
struct EventPayload {
  std::optional<std::string> note_id;
  std::optional<std::string> chapter_id;
  std::optional<std::size_t> rolling_index;
  std::optional<NoteKind> kind;          // AddNote
  std::optional<std::string> summary;    // AddNote, EditNote, EditRollingNote
  std::optional<std::string> title;      // EditChapterTitle
  std::optional<std::string> assignee;   // AssignTask, AddNote
  std::optional<CalendarDate> due_date;  // SetDueDate, AddNote
  std::optional<std::size_t> position;   // ReorderNote
  std::optional<std::size_t> anchor_index;  // AddNote
  std::optional<ShareDepth> depth;          // Share

  bool operator==(const EventPayload&) const = default;
};

struct FeedbackEvent {
  std::string event_id;
  std::string meeting_id;
  std::string actor;
  std::int64_t at_ms = 0;
  std::uint64_t base_version = 1;
  Action action = Action::kEditNote;
  EventPayload payload;
  std::optional<DeleteReason> delete_reason;

  bool operator==(const FeedbackEvent&) const = default;
};

nlohmann::json to_json(const FeedbackEvent& ev);
// Throws SchemaViolation naming the offending field.
FeedbackEvent event_from_json(const nlohmann::json& j);

// Checks `ev` against `doc` without changing anything. Throws kStaleVersion
// when base_version is behind, kValidationFailure for a malformed event or a
// base_version ahead of the document, kNodeNotFound for unknown targets and
// kIllegalAction for operations the target does not support.
void validate_event(const RecapDocument& doc, const FeedbackEvent& ev);

// New document at version + 1. Deletes are soft (tombstoned); markers are
// recomputed after anything that can change them.
RecapDocument apply(const RecapDocument& doc, const FeedbackEvent& ev);

// Append-only event storage for one meeting.
class EventLog {
 public:
  virtual ~EventLog() = default;

  // Returns the 0-based position of the appended event.
  virtual std::size_t append(const FeedbackEvent& ev) = 0;
  // Snapshot of the events recorded so far.
  virtual std::vector<FeedbackEvent> events() const = 0;
  virtual std::size_t size() const = 0;
};

class MemoryEventLog final : public EventLog {
 public:
  std::size_t append(const FeedbackEvent& ev) override;
  std::vector<FeedbackEvent> events() const override;
  std::size_t size() const override;

 private:
  mutable std::mutex mu_;
  std::vector<FeedbackEvent> events_;
};

// One JSON event per line. Existing lines are loaded on open; each append
// is flushed before returning.
class FileEventLog final : public EventLog {
 public:
  explicit FileEventLog(std::filesystem::path path);

  std::size_t append(const FeedbackEvent& ev) override;
  std::vector<FeedbackEvent> events() const override;
  std::size_t size() const override;

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<FeedbackEvent> events_;
  std::ofstream out_;
};

std::vector<FeedbackEvent> read_event_lines(std::istream& in);

struct RecordResult {
  std::size_t position = 0;
  RecapDocument document;
};

// Validates `ev` against `head`, appends it and returns the applied
// document. A DeleteNote without a reason is stored with kUnspecified.
// Callers serialize record() per meeting.
RecordResult record(EventLog& log, const RecapDocument& head, FeedbackEvent ev);

RecapDocument replay(const RecapDocument& initial, std::span<const FeedbackEvent> events);
// initial followed by the document after each event.
std::vector<RecapDocument> replay_history(const RecapDocument& initial,
                                          std::span<const FeedbackEvent> events);

// ---------------------------------------------------------------------------
// Training export

enum class Signal {
  kPositiveRelevance,
  kQualityImprovement,
  kAmbiguousNegative,
  kNavigationRelevance,
};

std::string_view to_string(Signal s);
Signal signal_from_string(std::string_view s);

struct TrainingWeights {
  double edit = 1.0;
  double add = 1.0;
  double share = 0.8;
  double navigation = 0.5;
  double ambiguous_negative = 0.3;

  // All weights in [0,1] and ambiguous_negative <= 0.3.
  void validate() const;
  bool operator==(const TrainingWeights&) const = default;
};

inline constexpr double kMaxAmbiguousNegativeWeight = 0.3;
inline constexpr int kTrainingSchemaVersion = 1;

struct TrainingExample {
  Signal signal = Signal::kPositiveRelevance;
  std::string context_text;
  std::string original_summary;
  std::optional<std::string> target;
  double weight = 0.0;
  std::string provenance;  // event_id

  bool operator==(const TrainingExample&) const = default;
};

nlohmann::json to_json(const TrainingExample& ex);
TrainingExample training_example_from_json(const nlohmann::json& j);

// `history[i]` is the document the i-th event was applied to (as returned by
// replay_history). Context text is rendered from `t` when given. Deletes with
// reasons other than Inaccurate/Irrelevant, reorders, collapses, marks,
// assignments, due dates and title edits export nothing.
std::vector<TrainingExample> export_training(std::span<const FeedbackEvent> log,
                                             std::span<const RecapDocument> history,
                                             const Transcript* t = nullptr,
                                             const TrainingWeights& weights = {});

// One JSON record per line with a schema_version field.
std::string training_to_jsonl(std::span<const TrainingExample> examples);

}  // namespace recap
