#include "recap/recapdoc.hpp"

#include <optional>
#include <utility>

#include <fmt/format.h>

#include "recap/error.hpp"

namespace recap {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Encoding

json span_json(const UtteranceSpan& s) { return {{"first", s.first}, {"last", s.last}}; }

json note_json(const Note& n) {
  json j = {{"note_id", n.note_id},
            {"kind", std::string(to_string(n.kind))},
            {"summary", n.summary},
            {"anchor", span_json(n.anchor)},
            {"context", span_json(n.context)},
            {"origin", std::string(to_string(n.origin))},
            {"position", n.position},
            {"marked", n.marked}};
  if (n.assignee) j["assignee"] = *n.assignee;
  if (n.due_date) j["due_date"] = n.due_date->to_string();
  if (n.deleted) {
    j["deleted"] = {{"event_id", n.deleted->event_id},
                    {"actor", n.deleted->actor},
                    {"at_ms", n.deleted->at_ms},
                    {"reason", std::string(to_string(n.deleted->reason))}};
  }
  return j;
}

json chapter_json(const Chapter& c) {
  json notes = json::array();
  for (const auto& rn : c.rolling_notes) {
    notes.push_back({{"span", span_json(rn.span)},
                     {"summary", rn.summary},
                     {"markers", rn.markers},
                     {"origin", std::string(to_string(rn.origin))}});
  }
  return {{"chapter_id", c.chapter_id},
          {"range", span_json(c.range)},
          {"title", c.title},
          {"one_liner", c.one_liner},
          {"timespan", {{"start_ms", c.timespan.start_ms}, {"end_ms", c.timespan.end_ms}}},
          {"rolling_notes", std::move(notes)},
          {"star_count", c.star_count},
          {"checkbox_count", c.checkbox_count},
          {"collapsed", c.collapsed}};
}

json highlights_json(const HighlightsView& v) {
  json kp = json::array();
  json ai = json::array();
  for (const auto& n : v.key_points) kp.push_back(note_json(n));
  for (const auto& n : v.action_items) ai.push_back(note_json(n));
  return {{"key_points", std::move(kp)}, {"action_items", std::move(ai)}};
}

// ---------------------------------------------------------------------------
// Decoding with path tracking

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SchemaViolation(path_.empty() ? "." : path_, msg);
  }

  Node field(const char* key) const {
    if (!j_.is_object()) fail("expected an object");
    auto it = j_.find(key);
    if (it == j_.end()) {
      throw SchemaViolation(path_ + "." + key, "required field missing");
    }
    return Node(*it, path_ + "." + key);
  }

  std::optional<Node> optional_field(const char* key) const {
    if (!j_.is_object()) fail("expected an object");
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Node(*it, path_ + "." + key);
  }

  std::vector<Node> items() const {
    if (!j_.is_array()) fail("expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < j_.size(); ++i) {
      out.emplace_back(j_[i], fmt::format("{}[{}]", path_, i));
    }
    return out;
  }

  std::string str() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  std::int64_t i64() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<std::int64_t>();
  }

  std::uint64_t u64() const {
    if (!j_.is_number_integer() || (j_.is_number_integer() && !j_.is_number_unsigned() &&
                                    j_.get<std::int64_t>() < 0)) {
      fail("expected a non-negative integer");
    }
    return j_.get<std::uint64_t>();
  }

  bool boolean() const {
    if (!j_.is_boolean()) fail("expected a boolean");
    return j_.get<bool>();
  }

  template <typename Fn>
  auto convert(Fn&& fn) const {
    try {
      return fn(str());
    } catch (const SchemaViolation&) {
      throw;
    } catch (const Error& e) {
      fail(e.what());
    }
  }

 private:
  const json& j_;
  std::string path_;
};

UtteranceSpan read_span(const Node& n) {
  UtteranceSpan s{n.field("first").u64(), n.field("last").u64()};
  if (s.last < s.first) n.fail("span ends before it starts");
  return s;
}

Note read_note(const Node& n, NoteKind expected) {
  Note note;
  note.note_id = n.field("note_id").str();
  note.kind = n.field("kind").convert([](const std::string& s) { return note_kind_from_string(s); });
  if (note.kind != expected) {
    throw SchemaViolation(n.path() + ".kind", "note filed under the wrong list");
  }
  note.summary = n.field("summary").str();
  note.anchor = read_span(n.field("anchor"));
  note.context = read_span(n.field("context"));
  note.origin = n.field("origin").convert([](const std::string& s) { return origin_from_string(s); });
  note.position = n.field("position").u64();
  note.marked = n.field("marked").boolean();
  if (auto a = n.optional_field("assignee")) note.assignee = a->str();
  if (auto d = n.optional_field("due_date")) {
    note.due_date = d->convert([](const std::string& s) { return CalendarDate::parse(s); });
  }
  if (auto d = n.optional_field("deleted")) {
    Tombstone t;
    t.event_id = d->field("event_id").str();
    t.actor = d->field("actor").str();
    t.at_ms = d->field("at_ms").i64();
    t.reason = d->field("reason").convert(
        [](const std::string& s) { return delete_reason_from_string(s); });
    note.deleted = std::move(t);
  }
  return note;
}

Chapter read_chapter(const Node& n) {
  Chapter c;
  c.chapter_id = n.field("chapter_id").str();
  c.range = read_span(n.field("range"));
  c.title = n.field("title").str();
  c.one_liner = n.field("one_liner").str();
  auto ts = n.field("timespan");
  c.timespan = {ts.field("start_ms").i64(), ts.field("end_ms").i64()};
  for (const auto& rn : n.field("rolling_notes").items()) {
    RollingNote r;
    r.span = read_span(rn.field("span"));
    r.summary = rn.field("summary").str();
    for (const auto& m : rn.field("markers").items()) r.markers.push_back(m.str());
    r.origin = rn.field("origin").convert([](const std::string& s) { return origin_from_string(s); });
    c.rolling_notes.push_back(std::move(r));
  }
  c.star_count = n.field("star_count").u64();
  c.checkbox_count = n.field("checkbox_count").u64();
  c.collapsed = n.field("collapsed").boolean();
  return c;
}

struct Violation {
  std::string path;
  std::string message;
};

std::optional<Violation> find_cross_ref_violation(const RecapDocument& doc) {
  const auto n = doc.transcript_length;
  for (auto kind : {NoteKind::kKeyPoint, NoteKind::kActionItem}) {
    const auto& lst = doc.highlights.list(kind);
    const char* name = kind == NoteKind::kKeyPoint ? "key_points" : "action_items";
    for (std::size_t i = 0; i < lst.size(); ++i) {
      const auto& note = lst[i];
      const auto path = fmt::format(".highlights.{}[{}]", name, i);
      if (note.anchor.last >= n || note.context.last >= n) {
        return Violation{path + ".anchor",
                         fmt::format("note {} anchored outside transcript of {}",
                                     note.note_id, n)};
      }
      if (!note.context.contains(note.anchor)) {
        return Violation{path + ".context", "context does not contain the anchor"};
      }
      if (note.kind == NoteKind::kKeyPoint && (note.assignee || note.due_date)) {
        return Violation{path, "key points carry no assignee or due date"};
      }
    }
  }
  std::size_t expected = 0;
  for (std::size_t i = 0; i < doc.chapters.size(); ++i) {
    const auto& ch = doc.chapters[i];
    const auto path = fmt::format(".chapters[{}]", i);
    if (ch.range.first != expected || ch.range.last >= n) {
      return Violation{path + ".range", "chapters do not partition the transcript"};
    }
    std::size_t next = ch.range.first;
    for (std::size_t k = 0; k < ch.rolling_notes.size(); ++k) {
      if (ch.rolling_notes[k].span.first != next) {
        return Violation{fmt::format("{}.rolling_notes[{}].span", path, k),
                         "rolling notes do not tile the chapter"};
      }
      next = ch.rolling_notes[k].span.last + 1;
    }
    if (next != ch.range.last + 1) {
      return Violation{path + ".rolling_notes", "rolling notes do not tile the chapter"};
    }
    expected = ch.range.last + 1;
  }
  if (!doc.chapters.empty() && expected != n) {
    return Violation{".chapters", "chapters do not cover the transcript"};
  }
  return std::nullopt;
}

std::string markers_prefix(const RecapDocument& doc, const RollingNote& rn) {
  std::string out;
  for (const auto& id : rn.markers) {
    const auto* note = doc.highlights.find(id);
    if (note == nullptr) continue;
    out += note->kind == NoteKind::kKeyPoint ? "\xE2\x98\x85 " : "[ ] ";
  }
  return out;
}

}  // namespace

const Chapter* RecapDocument::find_chapter(std::string_view chapter_id) const {
  for (const auto& c : chapters) {
    if (c.chapter_id == chapter_id) return &c;
  }
  return nullptr;
}

Chapter* RecapDocument::find_chapter(std::string_view chapter_id) {
  return const_cast<Chapter*>(std::as_const(*this).find_chapter(chapter_id));
}

void validate_cross_refs(const RecapDocument& doc) {
  if (auto v = find_cross_ref_violation(doc)) {
    throw Error(ErrorCode::kCrossRefInvalid, v->path + ": " + v->message);
  }
}

RecapDocument assemble(const Transcript& t, HighlightsView highlights,
                       std::vector<Chapter> chapters, json pipeline_config,
                       std::int64_t created_at_ms) {
  RecapDocument doc;
  doc.meeting_id = t.meeting_id();
  doc.version = 1;
  doc.transcript_ref = content_hash(t);
  doc.transcript_length = t.size();
  doc.highlights = std::move(highlights);
  doc.chapters = std::move(chapters);
  doc.created_at_ms = created_at_ms;
  doc.pipeline_config = std::move(pipeline_config);
  validate_cross_refs(doc);
  return doc;
}

json to_json(const RecapDocument& doc) {
  json chapters = json::array();
  for (const auto& c : doc.chapters) chapters.push_back(chapter_json(c));
  return {{"schema_version", doc.schema_version},
          {"meeting_id", doc.meeting_id},
          {"version", doc.version},
          {"transcript_ref", doc.transcript_ref},
          {"transcript_length", doc.transcript_length},
          {"highlights", highlights_json(doc.highlights)},
          {"chapters", std::move(chapters)},
          {"created_at_ms", doc.created_at_ms},
          {"pipeline_config", doc.pipeline_config}};
}

RecapDocument document_from_json(const json& j) {
  Node root(j, "");
  RecapDocument doc;
  doc.schema_version = static_cast<int>(root.field("schema_version").i64());
  if (doc.schema_version != kRecapSchemaVersion) {
    throw SchemaViolation(".schema_version",
                          fmt::format("unsupported schema version {}", doc.schema_version));
  }
  doc.meeting_id = root.field("meeting_id").str();
  doc.version = root.field("version").u64();
  if (doc.version == 0) throw SchemaViolation(".version", "versions start at 1");
  doc.transcript_ref = root.field("transcript_ref").str();
  doc.transcript_length = root.field("transcript_length").u64();
  auto hl = root.field("highlights");
  for (const auto& n : hl.field("key_points").items()) {
    doc.highlights.key_points.push_back(read_note(n, NoteKind::kKeyPoint));
  }
  for (const auto& n : hl.field("action_items").items()) {
    doc.highlights.action_items.push_back(read_note(n, NoteKind::kActionItem));
  }
  for (const auto& c : root.field("chapters").items()) {
    doc.chapters.push_back(read_chapter(c));
  }
  doc.created_at_ms = root.field("created_at_ms").i64();
  auto cfg = root.field("pipeline_config");
  if (!cfg.raw().is_object()) cfg.fail("expected an object");
  doc.pipeline_config = cfg.raw();

  if (auto v = find_cross_ref_violation(doc)) throw SchemaViolation(v->path, v->message);
  auto recomputed = doc.chapters;
  refresh_markers(recomputed, doc.highlights);
  for (std::size_t i = 0; i < recomputed.size(); ++i) {
    if (recomputed[i] != doc.chapters[i]) {
      throw SchemaViolation(fmt::format(".chapters[{}]", i),
                            "markers disagree with the highlights");
    }
  }
  return doc;
}

std::string to_portable(const RecapDocument& doc) { return to_json(doc).dump(); }

RecapDocument from_portable(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaViolation(".", std::string("not a JSON document: ") + e.what());
  }
  return document_from_json(j);
}

View view_from_string(std::string_view s) {
  if (s == "highlights") return View::kHighlights;
  if (s == "hierarchical") return View::kHierarchical;
  if (s == "both") return View::kBoth;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown view '{}'", s));
}

json project(const RecapDocument& doc, View view) {
  auto j = to_json(doc);
  if (view == View::kHighlights) j.erase("chapters");
  if (view == View::kHierarchical) j.erase("highlights");
  return j;
}

std::string_view to_string(ShareDepth d) {
  switch (d) {
    case ShareDepth::kOneLiner: return "one_liner";
    case ShareDepth::kNotes: return "notes";
    case ShareDepth::kFull: return "full";
  }
  return "one_liner";
}

ShareDepth share_depth_from_string(std::string_view s) {
  if (s == "one_liner" || s == "oneliner") return ShareDepth::kOneLiner;
  if (s == "notes") return ShareDepth::kNotes;
  if (s == "full") return ShareDepth::kFull;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown share depth '{}'", s));
}

std::string format_clock(std::int64_t ms) {
  const auto s = ms / 1000;
  return fmt::format("{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60);
}

std::string render_note_markdown(const Note& n, ShareDepth depth, const Transcript* t) {
  if (depth == ShareDepth::kOneLiner) return fmt::format("- {}\n", n.summary);
  std::string out = n.kind == NoteKind::kKeyPoint ? "- \xE2\x98\x85 " : "- [ ] ";
  out += n.summary;
  std::vector<std::string> details;
  if (n.assignee) details.push_back("assigned to " + *n.assignee);
  if (n.due_date) details.push_back("due " + n.due_date->to_string());
  if (!details.empty()) out += " (" + fmt::format("{}", fmt::join(details, "; ")) + ")";
  out += "\n";
  if (depth == ShareDepth::kFull) {
    if (t != nullptr && n.context.last < t->size()) {
      for (auto i = n.context.first; i <= n.context.last; ++i) {
        const auto& u = (*t)[i];
        out += fmt::format("  > [{}] {}: {}\n", format_clock(u.start_ms), u.speaker, u.text);
      }
    } else {
      out += fmt::format("  > context: utterances {}-{}\n", n.context.first, n.context.last);
    }
  }
  return out;
}

std::string render_chapter_markdown(const RecapDocument& doc, const Chapter& ch,
                                    ShareDepth depth) {
  switch (depth) {
    case ShareDepth::kOneLiner:
      return fmt::format("- **{}**: {}\n", ch.title, ch.one_liner);
    case ShareDepth::kNotes: {
      std::string out = fmt::format("## {}\n\n{}\n\n", ch.title, ch.one_liner);
      for (const auto& rn : ch.rolling_notes) out += fmt::format("- {}\n", rn.summary);
      return out;
    }
    case ShareDepth::kFull: {
      std::string out = fmt::format("## {} ({}-{})\n\n_{}_\n\n", ch.title,
                                    format_clock(ch.timespan.start_ms),
                                    format_clock(ch.timespan.end_ms), ch.one_liner);
      for (const auto& rn : ch.rolling_notes) {
        out += fmt::format("- {}{}\n", markers_prefix(doc, rn), rn.summary);
      }
      return out;
    }
  }
  return {};
}

ShareExtract share_extract(const RecapDocument& doc, std::string_view node_id,
                           ShareDepth depth, const Transcript* t,
                           std::string created_by, std::int64_t created_at_ms) {
  ShareExtract out;
  out.source = std::string(node_id);
  out.depth = depth;
  out.created_by = std::move(created_by);
  out.created_at_ms = created_at_ms;
  if (const auto* note = doc.highlights.find(node_id); note != nullptr && note->visible()) {
    out.rendered = render_note_markdown(*note, depth, t);
  } else if (const auto* ch = doc.find_chapter(node_id)) {
    out.rendered = render_chapter_markdown(doc, *ch, depth);
  } else {
    throw Error(ErrorCode::kNodeNotFound, fmt::format("no node '{}'", node_id));
  }
  return out;
}

std::string render_markdown(const RecapDocument& doc, View view) {
  std::string out;
  if (view != View::kHierarchical) {
    out += "# Highlights\n\n";
    bool any = false;
    for (auto kind : {NoteKind::kKeyPoint, NoteKind::kActionItem}) {
      std::string section;
      for (const auto& n : doc.highlights.list(kind)) {
        if (n.visible()) section += render_note_markdown(n, ShareDepth::kNotes);
      }
      if (section.empty()) continue;
      any = true;
      out += kind == NoteKind::kKeyPoint ? "## Notes\n\n" : "## Tasks\n\n";
      out += section + "\n";
    }
    if (!any) out += "_No highlights detected._\n\n";
  }
  if (view != View::kHighlights) {
    out += "# Chapters\n\n";
    for (const auto& ch : doc.chapters) {
      out += render_chapter_markdown(doc, ch, ShareDepth::kFull) + "\n";
    }
  }
  while (out.size() >= 2 && out.ends_with("\n\n")) out.pop_back();
  return out;
}

}  // namespace recap
