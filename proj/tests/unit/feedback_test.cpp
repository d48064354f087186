#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "recap/error.hpp"
#include "recap/feedback.hpp"

namespace recap {
namespace {

using nlohmann::json;
using testing::fixture_document;

FeedbackEvent event(const RecapDocument& doc, std::string id, Action a) {
  FeedbackEvent ev;
  ev.event_id = std::move(id);
  ev.meeting_id = doc.meeting_id;
  ev.actor = "amy";
  ev.at_ms = 1000;
  ev.base_version = doc.version;
  ev.action = a;
  return ev;
}

FeedbackEvent on_note(const RecapDocument& doc, std::string id, Action a, std::string note) {
  auto ev = event(doc, std::move(id), a);
  ev.payload.note_id = std::move(note);
  return ev;
}

FeedbackEvent on_chapter(const RecapDocument& doc, std::string id, Action a, std::string ch) {
  auto ev = event(doc, std::move(id), a);
  ev.payload.chapter_id = std::move(ch);
  return ev;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

TEST(Events, JsonRoundTrip) {
  testing::Rng rng(1);
  auto doc = fixture_document();
  for (std::size_t i = 0; i < 300; ++i) {
    const auto ev = testing::random_valid_event(rng, doc, i);
    const auto back = event_from_json(json::parse(to_json(ev).dump()));
    ASSERT_EQ(back, ev);
  }
  for (int a = 0; a < 14; ++a) {
    const auto action = static_cast<Action>(a);
    EXPECT_EQ(action_from_string(to_string(action)), action);
  }
  EXPECT_THROW(action_from_string("like"), Error);
}

TEST(Events, DecodingErrorsNameTheField) {
  auto j = to_json(on_note(fixture_document(), "e1", Action::kEditNote, "kp-1"));
  auto bad = j;
  bad.erase("actor");
  try {
    event_from_json(bad);
    FAIL();
  } catch (const SchemaViolation& e) {
    EXPECT_EQ(e.path(), ".actor");
  }
  bad = j;
  bad["action"] = "dance";
  EXPECT_THROW(event_from_json(bad), SchemaViolation);
  bad = j;
  bad["payload"]["due_date"] = "tomorrow";
  try {
    event_from_json(bad);
    FAIL();
  } catch (const SchemaViolation& e) {
    EXPECT_EQ(e.path(), ".payload.due_date");
  }
  bad = j;
  bad["base_version"] = -1;
  EXPECT_THROW(event_from_json(bad), SchemaViolation);
}

TEST(Apply, EditMarksUserOrigin) {
  const auto doc = fixture_document();
  auto ev = on_note(doc, "e1", Action::kEditNote, "kp-1");
  ev.payload.summary = "  Survey every customer.  ";
  const auto next = apply(doc, ev);
  EXPECT_EQ(next.version, 2u);
  EXPECT_EQ(next.highlights.find("kp-1")->summary, "Survey every customer.");
  EXPECT_EQ(next.highlights.find("kp-1")->origin, Origin::kUser);
  EXPECT_EQ(doc.highlights.find("kp-1")->origin, Origin::kModel);
}

TEST(Apply, DeleteIsSoftAndUpdatesMarkers) {
  const auto doc = fixture_document();
  auto ev = on_note(doc, "e1", Action::kDeleteNote, "ai-3");
  ev.delete_reason = DeleteReason::kDone;
  const auto next = apply(doc, ev);
  const auto* n = next.highlights.find("ai-3");
  ASSERT_NE(n, nullptr);
  ASSERT_TRUE(n->deleted.has_value());
  EXPECT_EQ(n->deleted->reason, DeleteReason::kDone);
  EXPECT_EQ(n->deleted->event_id, "e1");
  EXPECT_EQ(n->deleted->actor, "amy");
  EXPECT_EQ(next.chapters[0].checkbox_count, 0u);
  EXPECT_EQ(next.chapters[0].rolling_notes[0].markers, (std::vector<std::string>{"kp-1"}));
  // Deleted notes are not valid targets any more.
  auto again = on_note(next, "e2", Action::kEditNote, "ai-3");
  again.payload.summary = "x";
  EXPECT_EQ(code_of([&] { apply(next, again); }), ErrorCode::kIllegalAction);
}

TEST(Apply, ChaptersAndRollingNotesCannotBeDeleted) {
  const auto doc = fixture_document();
  auto ev = on_chapter(doc, "e1", Action::kDeleteNote, "ch-0");
  EXPECT_EQ(code_of([&] { apply(doc, ev); }), ErrorCode::kIllegalAction);
  ev.payload.rolling_index = 0;
  EXPECT_EQ(code_of([&] { apply(doc, ev); }), ErrorCode::kIllegalAction);
}

TEST(Apply, MarkAndUnmark) {
  const auto doc = fixture_document();
  const auto off = apply(doc, on_note(doc, "e1", Action::kUnmarkImportant, "kp-1"));
  EXPECT_FALSE(off.highlights.find("kp-1")->marked);
  EXPECT_EQ(off.chapters[0].star_count, 0u);
  const auto on = apply(off, on_note(off, "e2", Action::kMarkImportant, "kp-1"));
  EXPECT_TRUE(on.highlights.find("kp-1")->marked);
  EXPECT_EQ(on.chapters[0].star_count, 1u);
  EXPECT_EQ(on.version, 3u);
}

TEST(Apply, AssignmentsOnlyForActionItems) {
  const auto doc = fixture_document();
  auto ev = on_note(doc, "e1", Action::kAssignTask, "kp-1");
  ev.payload.assignee = "Chen";
  EXPECT_EQ(code_of([&] { apply(doc, ev); }), ErrorCode::kIllegalAction);
  ev.payload.note_id = "ai-3";
  EXPECT_EQ(apply(doc, ev).highlights.find("ai-3")->assignee, "Chen");
  auto due = on_note(doc, "e2", Action::kSetDueDate, "ai-3");
  due.payload.due_date = CalendarDate::parse("2026-11-01");
  EXPECT_EQ(apply(doc, due).highlights.find("ai-3")->due_date->to_string(), "2026-11-01");
  due.payload.note_id = "kp-1";
  EXPECT_EQ(code_of([&] { apply(doc, due); }), ErrorCode::kIllegalAction);
  due.payload.note_id = "ai-3";
  due.payload.due_date.reset();
  EXPECT_EQ(code_of([&] { apply(doc, due); }), ErrorCode::kValidationFailure);
}

TEST(Apply, AddNote) {
  const auto doc = fixture_document();
  auto ev = event(doc, "e9", Action::kAddNote);
  ev.payload.kind = NoteKind::kActionItem;
  ev.payload.summary = "Dana will book the room.";
  ev.payload.anchor_index = 8;
  ev.payload.assignee = "Dana";
  const auto next = apply(doc, ev);
  const auto* n = next.highlights.find("user-e9");
  ASSERT_NE(n, nullptr);
  EXPECT_EQ(n->origin, Origin::kUser);
  EXPECT_EQ(n->anchor, (UtteranceSpan{8, 8}));
  EXPECT_EQ(n->context, (UtteranceSpan{5, 9}));
  EXPECT_EQ(n->position, 1u);
  EXPECT_EQ(next.chapters[1].checkbox_count, 1u);
  EXPECT_EQ(next.chapters[1].rolling_notes[0].markers, (std::vector<std::string>{"user-e9"}));
  // Same id twice.
  auto dup = ev;
  dup.base_version = next.version;
  EXPECT_EQ(code_of([&] { apply(next, dup); }), ErrorCode::kValidationFailure);
  // Key points carry no assignee.
  ev.payload.kind = NoteKind::kKeyPoint;
  EXPECT_EQ(code_of([&] { apply(doc, ev); }), ErrorCode::kIllegalAction);
  ev.payload.assignee.reset();
  ev.payload.anchor_index = 10;
  EXPECT_EQ(code_of([&] { apply(doc, ev); }), ErrorCode::kValidationFailure);
}

TEST(Apply, ReorderRenumbers) {
  auto doc = fixture_document();
  for (int i = 0; i < 2; ++i) {
    auto ev = event(doc, "a" + std::to_string(i), Action::kAddNote);
    ev.payload.kind = NoteKind::kKeyPoint;
    ev.payload.summary = "extra " + std::to_string(i);
    ev.payload.anchor_index = 2;
    doc = apply(doc, ev);
  }
  auto ev = on_note(doc, "r1", Action::kReorderNote, "user-a1");
  ev.payload.position = 0;
  const auto next = apply(doc, ev);
  const auto& kps = next.highlights.key_points;
  ASSERT_EQ(kps.size(), 3u);
  EXPECT_EQ(kps[0].note_id, "user-a1");
  EXPECT_EQ(kps[1].note_id, "kp-1");
  EXPECT_EQ(kps[2].note_id, "user-a0");
  for (std::size_t i = 0; i < kps.size(); ++i) EXPECT_EQ(kps[i].position, i);
  ev.payload.position = 99;
  ev.payload.note_id = "kp-1";
  EXPECT_EQ(apply(doc, ev).highlights.key_points.back().note_id, "kp-1");
  const auto md = render_markdown(next, View::kHighlights);
  EXPECT_LT(md.find("extra 1"), md.find("survey all customers"));
}

TEST(Apply, ChapterEdits) {
  const auto doc = fixture_document();
  auto ev = on_chapter(doc, "e1", Action::kEditChapterTitle, "ch-1");
  ev.payload.title = "Money";
  auto next = apply(doc, ev);
  EXPECT_EQ(next.find_chapter("ch-1")->title, "Money");
  ev = on_chapter(next, "e2", Action::kEditRollingNote, "ch-0");
  ev.payload.rolling_index = 1;
  ev.payload.summary = "Chen flagged a low response rate.";
  next = apply(next, ev);
  EXPECT_EQ(next.chapters[0].rolling_notes[1].summary, "Chen flagged a low response rate.");
  EXPECT_EQ(next.chapters[0].rolling_notes[1].origin, Origin::kUser);
  ev = on_chapter(next, "e3", Action::kEditRollingNote, "ch-0");
  ev.payload.rolling_index = 2;
  ev.payload.summary = "x";
  EXPECT_EQ(code_of([&] { apply(next, ev); }), ErrorCode::kNodeNotFound);
  ev = on_chapter(next, "e3", Action::kExpandChapter, "ch-1");
  next = apply(next, ev);
  EXPECT_FALSE(next.chapters[1].collapsed);
  ev = on_chapter(next, "e4", Action::kCollapseChapter, "ch-1");
  next = apply(next, ev);
  EXPECT_TRUE(next.chapters[1].collapsed);
  EXPECT_EQ(next.version, 5u);
}

TEST(Apply, NavigationChangesOnlyTheVersion) {
  const auto doc = fixture_document();
  auto share = on_chapter(doc, "e1", Action::kShare, "ch-0");
  share.payload.depth = ShareDepth::kNotes;
  auto next = apply(doc, share);
  auto expected = doc;
  expected.version = 2;
  EXPECT_EQ(next, expected);
  next = apply(next, on_note(next, "e2", Action::kExpandContext, "kp-1"));
  expected.version = 3;
  EXPECT_EQ(next, expected);
  share.payload.note_id = "kp-1";
  share.base_version = next.version;
  EXPECT_EQ(code_of([&] { apply(next, share); }), ErrorCode::kValidationFailure);
}

TEST(Validate, VersionAndIdentity) {
  const auto doc = fixture_document();
  auto ev = on_note(doc, "e1", Action::kExpandContext, "kp-1");
  ev.base_version = 0;
  EXPECT_EQ(code_of([&] { validate_event(doc, ev); }), ErrorCode::kStaleVersion);
  ev.base_version = 2;
  EXPECT_EQ(code_of([&] { validate_event(doc, ev); }), ErrorCode::kValidationFailure);
  ev.base_version = 1;
  ev.actor = " ";
  EXPECT_EQ(code_of([&] { validate_event(doc, ev); }), ErrorCode::kValidationFailure);
  ev.actor = "amy";
  ev.meeting_id = "other";
  EXPECT_EQ(code_of([&] { validate_event(doc, ev); }), ErrorCode::kValidationFailure);
  ev.meeting_id = doc.meeting_id;
  ev.payload.note_id = "kp-404";
  EXPECT_EQ(code_of([&] { validate_event(doc, ev); }), ErrorCode::kNodeNotFound);
  ev.payload.note_id.reset();
  EXPECT_EQ(code_of([&] { validate_event(doc, ev); }), ErrorCode::kValidationFailure);
}

TEST(Record, StaleEventsAreRejectedAndNotLogged) {
  MemoryEventLog log;
  auto head = fixture_document();
  auto a = on_note(head, "a", Action::kExpandContext, "kp-1");
  auto b = on_note(head, "b", Action::kExpandContext, "ai-3");
  auto r = record(log, head, a);
  EXPECT_EQ(r.position, 0u);
  EXPECT_EQ(r.document.version, 2u);
  EXPECT_EQ(code_of([&] { record(log, r.document, b); }), ErrorCode::kStaleVersion);
  EXPECT_EQ(log.size(), 1u);
  b.base_version = 2;
  EXPECT_EQ(record(log, r.document, b).position, 1u);
  // Head out of step with the log.
  EXPECT_EQ(code_of([&] { record(log, head, a); }), ErrorCode::kValidationFailure);
}

TEST(Record, DeleteReasonDefaultsToUnspecified) {
  MemoryEventLog log;
  const auto head = fixture_document();
  const auto r = record(log, head, on_note(head, "d", Action::kDeleteNote, "kp-1"));
  EXPECT_EQ(log.events()[0].delete_reason, DeleteReason::kUnspecified);
  EXPECT_EQ(r.document.highlights.find("kp-1")->deleted->reason, DeleteReason::kUnspecified);
}

TEST(Replay, RandomLogsReplayToTheRecordedHead) {
  testing::Rng rng(31);
  for (int round = 0; round < 40; ++round) {
    auto initial = testing::random_document(rng);
    initial.version = 1;
    MemoryEventLog log;
    auto head = initial;
    const auto steps = testing::uniform(rng, 0, 40);
    for (std::size_t i = 0; i < steps; ++i) {
      head = record(log, head, testing::random_valid_event(rng, head, i)).document;
    }
    const auto events = log.events();
    const auto replayed = replay(initial, events);
    ASSERT_EQ(replayed, head);
    ASSERT_EQ(replayed.version, events.size() + 1);
    ASSERT_EQ(from_portable(to_portable(replayed)), replayed);
    const auto history = replay_history(initial, events);
    ASSERT_EQ(history.size(), events.size() + 1);
    ASSERT_EQ(history.back(), head);
  }
}

TEST(FileLog, PersistsAcrossReopen) {
  const auto path = std::filesystem::temp_directory_path() / "recap_events_test.jsonl";
  std::filesystem::remove(path);
  const auto head = fixture_document();
  {
    FileEventLog log(path);
    record(log, head, on_note(head, "a", Action::kExpandContext, "kp-1"));
  }
  {
    FileEventLog log(path);
    ASSERT_EQ(log.size(), 1u);
    EXPECT_EQ(log.events()[0].event_id, "a");
    auto next = replay(head, log.events());
    record(log, next, on_note(next, "b", Action::kExpandContext, "kp-1"));
  }
  std::ifstream in(path);
  EXPECT_EQ(read_event_lines(in).size(), 2u);
  std::ofstream(path, std::ios::app) << "{broken\n";
  EXPECT_EQ(code_of([&] { FileEventLog log(path); }), ErrorCode::kMalformedInput);
  std::filesystem::remove(path);
}

TEST(ReadEventLines, ReportsLineNumber) {
  std::istringstream in("\n{\"event_id\":1}\n");
  try {
    read_event_lines(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedInput);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

// Walks the fixture through one event of each kind and checks the export.
TEST(Training, MapsEventsToSignals) {
  auto doc = fixture_document();
  std::vector<FeedbackEvent> log;
  auto push = [&](FeedbackEvent ev) {
    ev.base_version = doc.version;
    doc = apply(doc, ev);
    log.push_back(std::move(ev));
  };
  const auto d0 = doc;
  auto edit = on_note(d0, "edit", Action::kEditNote, "kp-1");
  edit.payload.summary = "Survey everyone.";
  push(edit);
  auto add = event(d0, "add", Action::kAddNote);
  add.payload.kind = NoteKind::kKeyPoint;
  add.payload.summary = "Budget is on track.";
  add.payload.anchor_index = 7;
  push(add);
  auto share = on_chapter(d0, "share", Action::kShare, "ch-1");
  share.payload.depth = ShareDepth::kOneLiner;
  push(share);
  push(on_note(d0, "nav", Action::kExpandContext, "ai-3"));
  push(on_chapter(d0, "open", Action::kExpandChapter, "ch-1"));
  push(on_note(d0, "mark", Action::kUnmarkImportant, "kp-1"));
  auto rn = on_chapter(d0, "rn", Action::kEditRollingNote, "ch-0");
  rn.payload.rolling_index = 0;
  rn.payload.summary = "They planned the survey.";
  push(rn);
  auto del = on_note(d0, "del", Action::kDeleteNote, "user-add");
  del.delete_reason = DeleteReason::kIrrelevant;
  push(del);
  auto done = on_note(d0, "done", Action::kDeleteNote, "ai-3");
  done.delete_reason = DeleteReason::kDone;
  push(done);

  const auto history = replay_history(fixture_document(), log);
  const auto ex = export_training(log, history);
  ASSERT_EQ(ex.size(), 7u);
  EXPECT_EQ(ex[0].signal, Signal::kQualityImprovement);
  EXPECT_EQ(ex[0].original_summary, "The team decided to survey all customers.");
  EXPECT_EQ(ex[0].target, "Survey everyone.");
  EXPECT_DOUBLE_EQ(ex[0].weight, 1.0);
  EXPECT_EQ(ex[1].signal, Signal::kPositiveRelevance);
  EXPECT_EQ(ex[1].original_summary, "Budget is on track.");
  EXPECT_EQ(ex[2].signal, Signal::kPositiveRelevance);
  EXPECT_EQ(ex[2].original_summary, "Dana summarized the budget.");
  EXPECT_DOUBLE_EQ(ex[2].weight, 0.8);
  EXPECT_EQ(ex[3].signal, Signal::kNavigationRelevance);
  EXPECT_EQ(ex[3].provenance, "nav");
  EXPECT_DOUBLE_EQ(ex[3].weight, 0.5);
  EXPECT_EQ(ex[4].signal, Signal::kNavigationRelevance);
  EXPECT_EQ(ex[4].provenance, "open");
  EXPECT_EQ(ex[5].signal, Signal::kQualityImprovement);
  EXPECT_EQ(ex[5].original_summary, "Alice and Bob planned the customer survey.");
  EXPECT_EQ(ex[6].signal, Signal::kAmbiguousNegative);
  EXPECT_EQ(ex[6].provenance, "del");
  EXPECT_DOUBLE_EQ(ex[6].weight, 0.3);
  for (const auto& e : ex) EXPECT_TRUE(e.context_text.empty());

  const auto t = testing::uniform_transcript(10, 2);
  const auto with_text = export_training(log, history, &t);
  EXPECT_EQ(with_text[0].context_text, render_span(t, {0, 4}, true));
  EXPECT_EQ(with_text[1].context_text, render_span(t, {4, 9}, true));

  std::istringstream lines(training_to_jsonl(ex));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j["schema_version"], kTrainingSchemaVersion);
    EXPECT_EQ(training_example_from_json(j), ex[count]);
    ++count;
  }
  EXPECT_EQ(count, ex.size());
}

TEST(Training, WeightsValidate) {
  EXPECT_NO_THROW(TrainingWeights{}.validate());
  TrainingWeights w;
  w.ambiguous_negative = 0.31;
  EXPECT_THROW(w.validate(), Error);
  w = {};
  w.edit = 1.2;
  EXPECT_THROW(w.validate(), Error);
  EXPECT_EQ(signal_from_string("navigation_relevance"), Signal::kNavigationRelevance);
}

TEST(Training, AmbiguousNegativeNeverOutweighsPositive) {
  testing::Rng rng(8);
  for (int round = 0; round < 30; ++round) {
    const auto initial = testing::random_document(rng);
    std::vector<FeedbackEvent> log;
    auto head = initial;
    for (std::size_t i = 0; i < 30; ++i) {
      auto ev = testing::random_valid_event(rng, head, i);
      head = apply(head, ev);
      log.push_back(ev);
    }
    for (const auto& ex : export_training(log, replay_history(initial, log))) {
      if (ex.signal == Signal::kAmbiguousNegative) {
        ASSERT_LE(ex.weight, kMaxAmbiguousNegativeWeight);
      }
      ASSERT_FALSE(ex.provenance.empty());
    }
  }
}

}  // namespace
}  // namespace recap
