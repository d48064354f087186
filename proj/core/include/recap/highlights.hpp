#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recap/transcript.hpp"

namespace recap {

class Backend;

enum class NoteKind { kKeyPoint, kActionItem };
enum class Origin { kModel, kUser };
enum class DeleteReason { kDone, kRedundant, kInaccurate, kIrrelevant, kUnspecified };

std::string_view to_string(NoteKind k);
std::string_view to_string(Origin o);
std::string_view to_string(DeleteReason r);
NoteKind note_kind_from_string(std::string_view s);
Origin origin_from_string(std::string_view s);
DeleteReason delete_reason_from_string(std::string_view s);

// Calendar date carried as YYYY-MM-DD on the wire.
struct CalendarDate {
  std::chrono::year_month_day ymd;

  // Throws kInvalidArgument for anything but a valid YYYY-MM-DD.
  static CalendarDate parse(std::string_view s);
  std::string to_string() const;

  bool operator==(const CalendarDate&) const = default;
};

// Soft-delete marker; the note stays in the document but is never rendered.
struct Tombstone {
  std::string event_id;
  std::string actor;
  std::int64_t at_ms = 0;
  DeleteReason reason = DeleteReason::kUnspecified;

  bool operator==(const Tombstone&) const = default;
};

struct Note {
  std::string note_id;
  NoteKind kind = NoteKind::kKeyPoint;
  std::string summary;
  UtteranceSpan anchor;
  UtteranceSpan context;
  std::optional<std::string> assignee;  // action items only
  std::optional<CalendarDate> due_date;  // action items only
  Origin origin = Origin::kModel;
  std::size_t position = 0;
  // Shows a star/checkbox in the hierarchical view.
  bool marked = true;
  std::optional<Tombstone> deleted;

  bool visible() const { return !deleted.has_value(); }
  bool operator==(const Note&) const = default;
};

struct HighlightsView {
  std::vector<Note> key_points;
  std::vector<Note> action_items;

  std::vector<Note>& list(NoteKind k) {
    return k == NoteKind::kKeyPoint ? key_points : action_items;
  }
  const std::vector<Note>& list(NoteKind k) const {
    return k == NoteKind::kKeyPoint ? key_points : action_items;
  }
  const Note* find(std::string_view note_id) const;
  Note* find(std::string_view note_id);
  // Both lists, key points first.
  std::vector<const Note*> all() const;

  bool operator==(const HighlightsView&) const = default;
};

struct HighlightCandidate {
  std::size_t utterance_index = 0;
  NoteKind kind = NoteKind::kKeyPoint;
  double score = 0.0;

  bool operator==(const HighlightCandidate&) const = default;
};

struct HighlightsConfig {
  std::size_t extract_context_tokens = 107;
  std::size_t abstract_context_tokens = 512;
  std::size_t max_notes = 10;  // per kind
  double score_threshold = 0.5;
  std::size_t display_context_utterances = 3;

  void validate() const;
  bool operator==(const HighlightsConfig&) const = default;
};

// Scores every utterance (with its extractive context window) through the
// backend, keeps scores >= threshold, caps each kind at max_notes by score
// (ties go to the earlier utterance) and returns the survivors in
// chronological order, key point before action item on the same utterance.
std::vector<HighlightCandidate> detect_highlights(const Transcript& t,
                                                  Backend& backend,
                                                  const HighlightsConfig& cfg);

// Rewrites one candidate into a standalone third-person note. Throws
// kEmptyRewrite when the backend returns blank text.
Note abstract_highlight(const HighlightCandidate& c, const Transcript& t,
                        Backend& backend, const HighlightsConfig& cfg);

// Partitions by kind, orders each list by stored position (chronology breaks
// ties) and renumbers positions 0..k-1.
HighlightsView build_highlights_view(std::vector<Note> notes);

// detect -> abstract (candidates with empty rewrites are dropped and logged)
// -> view.
HighlightsView run_highlights(const Transcript& t, Backend& backend,
                              const HighlightsConfig& cfg);

// Renders `span` as backend context, dropping the utterances farthest from
// `center` until the estimate fits `budget`. The center itself is excluded.
std::string fit_context(const Transcript& t, const UtteranceSpan& span,
                        std::size_t center, std::size_t budget);

std::string note_id_for(NoteKind kind, std::size_t utterance_index);

}  // namespace recap
