#include "generators.hpp"

#include <algorithm>
#include <atomic>
#include <set>

#include <unistd.h>

#include <fmt/format.h>

#include "recap/chapters.hpp"
#include "recap/pipeline.hpp"

namespace recap::testing {
namespace {

const std::vector<std::string> kSpeakers = {"Alice", "Bob", "Chen", "Dana"};

const std::vector<std::string> kChatter = {
    "the roadmap looks reasonable to me",
    "I will draft the proposal by Friday",
    "we decided to keep the current vendor",
    "can someone check the numbers again?",
    "importantly the launch date cannot move",
    "our customers asked for offline mode",
    "action item for Dana is the contract review",
    "I think we should wait for the data",
    "let me share my screen for a second",
    "the key takeaway is that latency doubled",
    "we'll sync with legal next week",
    "todo: update the onboarding docs",
    "agreed that the pilot stays small",
    "budget review for the third quarter is pending",
    "sounds good, moving on",
};

const std::vector<std::string> kSummaries = {
    "Alice will send the survey results by Friday.",
    "The team agreed on a \"soft\" launch.",
    "Bob noted that C:\\path\\to\\file must stay.",
    "Chen asked: is the café open?",
    "Dana reviews the ★ priorities\tand tabs.",
    "Résumé screening moves to 日本 office.",
    "Line one\nline two.",
    "Plain summary.",
};

const std::vector<std::string> kTitles = {"Survey rollout", "Budget", "Hiring plan",
                                          "Untitled section", "Q3 \"launch\" risks",
                                          "Überblick"};

std::string random_hex(Rng& rng, std::size_t chars) {
  std::string s;
  for (std::size_t i = 0; i < chars; ++i) s += "0123456789abcdef"[rng() % 16];
  return s;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng() % v.size()];
}

}  // namespace

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Transcript make_transcript(const std::vector<std::pair<std::string, std::string>>& lines) {
  std::vector<Utterance> us;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Utterance u;
    u.speaker = lines[i].first;
    u.text = lines[i].second;
    u.start_ms = static_cast<std::int64_t>(i) * 5000;
    u.end_ms = u.start_ms + 4000;
    us.push_back(std::move(u));
  }
  return Transcript(std::move(us), SourceFormat::kPlainSpeaker);
}

Transcript uniform_transcript(std::size_t count, std::size_t words) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (std::size_t i = 0; i < count; ++i) {
    std::string text;
    for (std::size_t w = 0; w < words; ++w) {
      if (w > 0) text += ' ';
      text += topic_word(i % 5, w);
    }
    lines.emplace_back(std::string(1, static_cast<char>('A' + i % 3)), text);
  }
  return make_transcript(lines);
}

std::string topic_word(std::size_t topic, std::size_t j) {
  std::string w = "zq";
  w += static_cast<char>('a' + topic % 26);
  w += static_cast<char>('a' + (topic / 26) % 26);
  w += static_cast<char>('a' + (j / 26) % 26);
  w += static_cast<char>('a' + j % 26);
  return w;
}

Transcript disjoint_topic_transcript(Rng& rng, const std::vector<std::size_t>& sizes,
                                     std::size_t words, std::size_t vocab) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (std::size_t topic = 0; topic < sizes.size(); ++topic) {
    for (std::size_t i = 0; i < sizes[topic]; ++i) {
      std::string text;
      for (std::size_t w = 0; w < words; ++w) {
        if (w > 0) text += ' ';
        text += topic_word(topic, uniform(rng, 0, vocab - 1));
      }
      lines.emplace_back(pick(rng, kSpeakers), text);
    }
  }
  return make_transcript(lines);
}

Transcript chatter_transcript(Rng& rng, std::size_t n) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (std::size_t i = 0; i < n; ++i) lines.emplace_back(pick(rng, kSpeakers), pick(rng, kChatter));
  return make_transcript(lines);
}

SegmentationConfig random_segmentation_config(Rng& rng) {
  SegmentationConfig cfg;
  cfg.window_utterances = uniform(rng, 1, 40);
  cfg.stride_utterances = uniform(rng, 1, cfg.window_utterances);
  cfg.boundary_threshold = unit(rng);
  cfg.min_segment_utterances = uniform(rng, 0, 8);
  return cfg;
}

SegmentList random_segment_list(Rng& rng, std::size_t n) {
  std::vector<std::size_t> starts = {0};
  for (std::size_t i = 1; i < n; ++i) {
    if (rng() % 5 == 0) starts.push_back(i);
  }
  return SegmentList::from_boundaries(starts, n);
}

RecapDocument random_document(Rng& rng) {
  RecapDocument doc;
  const auto n = uniform(rng, 1, 60);
  doc.meeting_id = "mtg-" + random_hex(rng, 16);
  doc.version = uniform(rng, 1, 1000);
  doc.transcript_ref = random_hex(rng, 64);
  doc.transcript_length = n;
  doc.created_at_ms = static_cast<std::int64_t>(rng() >> 1) * (rng() % 2 == 0 ? 1 : -1);

  PipelineConfig cfg;
  cfg.segmentation.boundary_threshold = unit(rng);
  cfg.highlights.score_threshold = unit(rng);
  cfg.highlights.display_context_utterances = uniform(rng, 1, 5);
  cfg.chapters.chunk_size = uniform(rng, 1, 8);
  doc.pipeline_config = to_json(cfg);

  std::vector<Note> notes;
  std::set<std::string> ids;
  const auto count = uniform(rng, 0, 10);
  for (std::size_t i = 0; i < count; ++i) {
    Note note;
    note.kind = rng() % 2 == 0 ? NoteKind::kKeyPoint : NoteKind::kActionItem;
    const auto a = uniform(rng, 0, n - 1);
    note.note_id = rng() % 4 == 0 ? "user-" + random_hex(rng, 6) : note_id_for(note.kind, a);
    if (!ids.insert(note.note_id).second) continue;
    note.summary = pick(rng, kSummaries);
    note.anchor = {a, a};
    const auto r = uniform(rng, 0, 3);
    note.context = {a - std::min(a, r), std::min(a + r, n - 1)};
    note.origin = rng() % 3 == 0 ? Origin::kUser : Origin::kModel;
    note.position = uniform(rng, 0, 20);
    note.marked = rng() % 4 != 0;
    if (note.kind == NoteKind::kActionItem) {
      if (rng() % 2 == 0) note.assignee = pick(rng, kSpeakers);
      if (rng() % 2 == 0) {
        note.due_date = CalendarDate::parse(
            fmt::format("20{:02}-{:02}-{:02}", uniform(rng, 20, 40), uniform(rng, 1, 12),
                        uniform(rng, 1, 28)));
      }
    }
    if (rng() % 5 == 0) {
      note.deleted = Tombstone{"ev-" + random_hex(rng, 4), pick(rng, kSpeakers),
                               static_cast<std::int64_t>(uniform(rng, 0, 1u << 30)),
                               static_cast<DeleteReason>(uniform(rng, 0, 4))};
    }
    notes.push_back(std::move(note));
  }
  doc.highlights = build_highlights_view(std::move(notes));

  const auto segs = random_segment_list(rng, n);
  const auto chunk = uniform(rng, 1, 8);
  std::int64_t clock = static_cast<std::int64_t>(uniform(rng, 0, 100000));
  for (std::size_t k = 0; k < segs.size(); ++k) {
    Chapter ch;
    ch.chapter_id = fmt::format("ch-{}", k);
    ch.range = segs.ranges()[k];
    ch.title = pick(rng, kTitles);
    ch.one_liner = pick(rng, kSummaries);
    const auto start = clock;
    clock += static_cast<std::int64_t>(uniform(rng, 0, 600000));
    ch.timespan = {start, clock};
    for (const auto& span : chunk_range(ch.range, chunk)) {
      ch.rolling_notes.push_back({span, pick(rng, kSummaries), {},
                                  rng() % 5 == 0 ? Origin::kUser : Origin::kModel});
    }
    ch.collapsed = rng() % 2 == 0;
    doc.chapters.push_back(std::move(ch));
  }
  refresh_markers(doc.chapters, doc.highlights);
  return doc;
}

FeedbackEvent random_valid_event(Rng& rng, const RecapDocument& doc, std::size_t seq) {
  FeedbackEvent ev;
  ev.event_id = fmt::format("ev-{}", seq);
  ev.meeting_id = doc.meeting_id;
  ev.actor = rng() % 2 == 0 ? "u1" : "u2";
  ev.at_ms = static_cast<std::int64_t>(seq) * 1000;
  ev.base_version = doc.version;

  std::vector<const Note*> visible;
  std::vector<const Note*> tasks;
  for (const auto* n : doc.highlights.all()) {
    if (!n->visible()) continue;
    visible.push_back(n);
    if (n->kind == NoteKind::kActionItem) tasks.push_back(n);
  }
  for (;;) {
    const auto action = static_cast<Action>(uniform(rng, 0, 13));
    ev.action = action;
    ev.payload = {};
    ev.delete_reason.reset();
    auto& p = ev.payload;
    switch (action) {
      case Action::kAddNote:
        p.kind = rng() % 2 == 0 ? NoteKind::kKeyPoint : NoteKind::kActionItem;
        p.summary = pick(rng, kSummaries);
        p.anchor_index = uniform(rng, 0, doc.transcript_length - 1);
        if (*p.kind == NoteKind::kActionItem && rng() % 2 == 0) p.assignee = pick(rng, kSpeakers);
        return ev;
      case Action::kEditNote:
      case Action::kDeleteNote:
      case Action::kMarkImportant:
      case Action::kUnmarkImportant:
      case Action::kReorderNote:
      case Action::kExpandContext:
        if (visible.empty()) continue;
        p.note_id = pick(rng, visible)->note_id;
        if (action == Action::kEditNote) p.summary = pick(rng, kSummaries);
        if (action == Action::kReorderNote) p.position = uniform(rng, 0, 12);
        if (action == Action::kDeleteNote && rng() % 4 != 0) {
          ev.delete_reason = static_cast<DeleteReason>(uniform(rng, 0, 4));
        }
        return ev;
      case Action::kAssignTask:
      case Action::kSetDueDate:
        if (tasks.empty()) continue;
        p.note_id = pick(rng, tasks)->note_id;
        if (action == Action::kAssignTask) {
          p.assignee = pick(rng, kSpeakers);
        } else {
          p.due_date = CalendarDate::parse(fmt::format("2027-0{}-1{}", uniform(rng, 1, 9),
                                                       uniform(rng, 0, 9)));
        }
        return ev;
      case Action::kEditChapterTitle:
      case Action::kEditRollingNote:
      case Action::kCollapseChapter:
      case Action::kExpandChapter: {
        if (doc.chapters.empty()) continue;
        const auto& ch = doc.chapters[uniform(rng, 0, doc.chapters.size() - 1)];
        p.chapter_id = ch.chapter_id;
        if (action == Action::kEditChapterTitle) p.title = pick(rng, kTitles);
        if (action == Action::kEditRollingNote) {
          p.rolling_index = uniform(rng, 0, ch.rolling_notes.size() - 1);
          p.summary = pick(rng, kSummaries);
        }
        return ev;
      }
      case Action::kShare:
        if (!visible.empty() && rng() % 2 == 0) {
          p.note_id = pick(rng, visible)->note_id;
        } else if (!doc.chapters.empty()) {
          p.chapter_id = doc.chapters[uniform(rng, 0, doc.chapters.size() - 1)].chapter_id;
        } else {
          continue;
        }
        p.depth = static_cast<ShareDepth>(uniform(rng, 0, 2));
        return ev;
    }
  }
}

RecapDocument fixture_document() {
  RecapDocument doc;
  doc.meeting_id = "mtg-fixture";
  doc.version = 1;
  doc.transcript_ref = std::string(64, 'a');
  doc.transcript_length = 10;
  doc.created_at_ms = 1700000000000;
  doc.pipeline_config = to_json(PipelineConfig{});

  Note kp;
  kp.note_id = "kp-1";
  kp.kind = NoteKind::kKeyPoint;
  kp.summary = "The team decided to survey all customers.";
  kp.anchor = {1, 1};
  kp.context = {0, 4};
  Note ai;
  ai.note_id = "ai-3";
  ai.kind = NoteKind::kActionItem;
  ai.summary = "Bob will send the survey results by Friday.";
  ai.anchor = {3, 3};
  ai.context = {0, 6};
  ai.assignee = "Bob";
  ai.due_date = CalendarDate::parse("2026-10-16");
  doc.highlights = build_highlights_view({kp, ai});

  Chapter c0;
  c0.chapter_id = "ch-0";
  c0.range = {0, 5};
  c0.title = "Survey rollout";
  c0.one_liner = "Alice opened with the survey timeline.";
  c0.timespan = {0, 30000};
  c0.rolling_notes = {{{0, 3}, "Alice and Bob planned the customer survey.", {}, Origin::kModel},
                      {{4, 5}, "Chen raised the response-rate risk.", {}, Origin::kModel}};
  c0.collapsed = false;
  Chapter c1;
  c1.chapter_id = "ch-1";
  c1.range = {6, 9};
  c1.title = "Budget";
  c1.one_liner = "Dana summarized the budget.";
  c1.timespan = {30000, 65000};
  c1.rolling_notes = {{{6, 9}, "Dana said the budget is on track.", {}, Origin::kModel}};
  doc.chapters = {c0, c1};
  refresh_markers(doc.chapters, doc.highlights);
  return doc;
}

std::string plain_meeting_body(std::size_t n) {
  std::string body;
  for (std::size_t i = 0; i < n; ++i) {
    static const char* const kNames[] = {"Amy", "Cal", "Bob"};
    const char* speaker = kNames[i % 3];
    std::string line;
    if (i == 1) {
      line = "We decided to ship the beta next month.";
    } else if (i == 2) {
      line = "I will send the survey results by Friday.";
    } else {
      line = fmt::format("Status line {} covers the schedule.", i);
    }
    body += fmt::format("{}: {}\n", speaker, line);
  }
  return body;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          fmt::format("recap-{}-{}-{}", tag, ::getpid(), counter++);
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace recap::testing
