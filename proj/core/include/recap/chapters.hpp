#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recap/highlights.hpp"
#include "recap/segmentation.hpp"
#include "recap/transcript.hpp"

namespace recap {

class Backend;

struct Timespan {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  bool operator==(const Timespan&) const = default;
};

struct RollingNote {
  UtteranceSpan span;  // at most chunk_size utterances
  std::string summary;
  std::vector<std::string> markers;  // note ids anchored inside span
  Origin origin = Origin::kModel;

  bool operator==(const RollingNote&) const = default;
};

struct Chapter {
  std::string chapter_id;
  UtteranceSpan range;
  std::string title;
  std::string one_liner;
  Timespan timespan;
  std::vector<RollingNote> rolling_notes;
  std::size_t star_count = 0;      // visible, marked key points in range
  std::size_t checkbox_count = 0;  // visible, marked action items in range
  bool collapsed = true;

  bool operator==(const Chapter&) const = default;
};

inline constexpr std::string_view kFallbackTitle = "Untitled section";

struct ChaptersConfig {
  std::size_t chunk_size = 8;
  std::size_t context_tokens = 512;

  void validate() const;
  bool operator==(const ChaptersConfig&) const = default;
};

// One chapter per segment: rolling notes for each sequential chunk, a title
// and one-liner from the title capability, timespans and marker counts from
// `notes`. A backend failure inside a chapter degrades that chapter to the
// fallback title and raw extracts; other chapters are unaffected.
std::vector<Chapter> build_chapters(const Transcript& t, const SegmentList& segs,
                                    std::span<const Note> notes, Backend& backend,
                                    const ChaptersConfig& cfg = {});

// Chunk spans for a range, in order.
std::vector<UtteranceSpan> chunk_range(const UtteranceSpan& range,
                                       std::size_t chunk_size);

// Recomputes star/checkbox counts and rolling-note marker ids from the
// highlights view.
void refresh_markers(std::vector<Chapter>& chapters, const HighlightsView& view);

enum class ExpandLevel { kTitleOnly, kNotes, kTranscriptLinked };

struct UtteranceRef {
  std::size_t index = 0;
  std::int64_t start_ms = 0;

  bool operator==(const UtteranceRef&) const = default;
};

struct RenderedRollingNote {
  UtteranceSpan span;
  std::string summary;
  std::vector<std::string> markers;
  std::vector<UtteranceRef> refs;  // kTranscriptLinked only
};

struct ChapterRendering {
  ExpandLevel level = ExpandLevel::kTitleOnly;
  std::string chapter_id;
  std::string title;
  std::string one_liner;
  Timespan timespan;
  std::size_t star_count = 0;
  std::size_t checkbox_count = 0;
  bool collapsed = true;
  std::vector<RenderedRollingNote> rolling_notes;
};

// Any level beyond kTitleOnly opens the chapter (collapsed = false).
// kTranscriptLinked needs the transcript for timestamps; throws
// kInvalidArgument without one.
ChapterRendering expand_chapter(const Chapter& ch, ExpandLevel level,
                                const Transcript* t = nullptr);

}  // namespace recap
