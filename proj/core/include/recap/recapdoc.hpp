#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "recap/chapters.hpp"
#include "recap/highlights.hpp"
#include "recap/transcript.hpp"

namespace recap {

inline constexpr int kRecapSchemaVersion = 1;

// Both recap views for one meeting. The transcript is referenced by content
// hash only.
struct RecapDocument {
  int schema_version = kRecapSchemaVersion;
  std::string meeting_id;
  std::uint64_t version = 1;
  std::string transcript_ref;
  std::size_t transcript_length = 0;
  HighlightsView highlights;
  std::vector<Chapter> chapters;
  std::int64_t created_at_ms = 0;
  nlohmann::json pipeline_config = nlohmann::json::object();

  const Chapter* find_chapter(std::string_view chapter_id) const;
  Chapter* find_chapter(std::string_view chapter_id);

  bool operator==(const RecapDocument&) const = default;
};

// Version-1 document. Throws kCrossRefInvalid when a note anchor/context or a
// chapter range falls outside the transcript, or chapters fail to partition
// it.
RecapDocument assemble(const Transcript& t, HighlightsView highlights,
                       std::vector<Chapter> chapters,
                       nlohmann::json pipeline_config, std::int64_t created_at_ms);

void validate_cross_refs(const RecapDocument& doc);

nlohmann::json to_json(const RecapDocument& doc);
// Throws SchemaViolation naming the offending path.
RecapDocument document_from_json(const nlohmann::json& j);

// Canonical bytes: compact JSON, keys sorted, integers only outside the
// config snapshot. from_portable(to_portable(d)) == d.
std::string to_portable(const RecapDocument& doc);
RecapDocument from_portable(std::string_view bytes);

enum class View { kHighlights, kHierarchical, kBoth };
View view_from_string(std::string_view s);

// Document JSON without the field the view hides.
nlohmann::json project(const RecapDocument& doc, View view);

enum class ShareDepth { kOneLiner, kNotes, kFull };
std::string_view to_string(ShareDepth d);
ShareDepth share_depth_from_string(std::string_view s);

struct ShareExtract {
  std::string source;  // note_id or chapter_id
  ShareDepth depth = ShareDepth::kOneLiner;
  std::string rendered;
  std::string created_by;
  std::int64_t created_at_ms = 0;
};

// Markdown for one note or chapter. Full on a note quotes its context
// utterances when the transcript is supplied. Throws kNodeNotFound for an
// unknown or deleted node.
ShareExtract share_extract(const RecapDocument& doc, std::string_view node_id,
                           ShareDepth depth, const Transcript* t = nullptr,
                           std::string created_by = {},
                           std::int64_t created_at_ms = 0);

std::string render_note_markdown(const Note& n, ShareDepth depth,
                                 const Transcript* t = nullptr);
std::string render_chapter_markdown(const RecapDocument& doc, const Chapter& ch,
                                    ShareDepth depth);

// Whole-document export. Deleted notes are omitted.
std::string render_markdown(const RecapDocument& doc, View view = View::kBoth);

std::string format_clock(std::int64_t ms);

}  // namespace recap
