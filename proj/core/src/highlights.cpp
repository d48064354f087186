#include "recap/highlights.hpp"

#include <algorithm>
#include <charconv>
#include <deque>

#include <fmt/format.h>

#include "recap/backend.hpp"
#include "recap/error.hpp"
#include "recap/log.hpp"
#include "recap/parallel.hpp"
#include "recap/text.hpp"

namespace recap {
namespace {

template <typename T>
std::optional<T> parse_fixed(std::string_view s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::string_view to_string(NoteKind k) {
  return k == NoteKind::kKeyPoint ? "key_point" : "action_item";
}

std::string_view to_string(Origin o) { return o == Origin::kModel ? "model" : "user"; }

std::string_view to_string(DeleteReason r) {
  switch (r) {
    case DeleteReason::kDone: return "done";
    case DeleteReason::kRedundant: return "redundant";
    case DeleteReason::kInaccurate: return "inaccurate";
    case DeleteReason::kIrrelevant: return "irrelevant";
    case DeleteReason::kUnspecified: return "unspecified";
  }
  return "unspecified";
}

NoteKind note_kind_from_string(std::string_view s) {
  if (s == "key_point") return NoteKind::kKeyPoint;
  if (s == "action_item") return NoteKind::kActionItem;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown note kind '{}'", s));
}

Origin origin_from_string(std::string_view s) {
  if (s == "model") return Origin::kModel;
  if (s == "user") return Origin::kUser;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown origin '{}'", s));
}

DeleteReason delete_reason_from_string(std::string_view s) {
  for (auto r : {DeleteReason::kDone, DeleteReason::kRedundant,
                 DeleteReason::kInaccurate, DeleteReason::kIrrelevant,
                 DeleteReason::kUnspecified}) {
    if (s == to_string(r)) return r;
  }
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("unknown delete reason '{}'", s));
}

CalendarDate CalendarDate::parse(std::string_view s) {
  if (s.size() == 10 && s[4] == '-' && s[7] == '-' && all_digits(s.substr(0, 4)) &&
      all_digits(s.substr(5, 2)) && all_digits(s.substr(8, 2))) {
    auto y = parse_fixed<int>(s.substr(0, 4));
    auto m = parse_fixed<unsigned>(s.substr(5, 2));
    auto d = parse_fixed<unsigned>(s.substr(8, 2));
    std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{*m},
                                    std::chrono::day{*d}};
    if (ymd.ok()) return {ymd};
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("invalid date '{}'", s));
}

std::string CalendarDate::to_string() const {
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

const Note* HighlightsView::find(std::string_view note_id) const {
  for (const auto* lst : {&key_points, &action_items}) {
    for (const auto& n : *lst) {
      if (n.note_id == note_id) return &n;
    }
  }
  return nullptr;
}

Note* HighlightsView::find(std::string_view note_id) {
  return const_cast<Note*>(std::as_const(*this).find(note_id));
}

std::vector<const Note*> HighlightsView::all() const {
  std::vector<const Note*> out;
  for (const auto& n : key_points) out.push_back(&n);
  for (const auto& n : action_items) out.push_back(&n);
  return out;
}

void HighlightsConfig::validate() const {
  if (extract_context_tokens == 0 || abstract_context_tokens == 0 ||
      max_notes == 0 || display_context_utterances == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "highlights budgets, max_notes and display context must be positive");
  }
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("score threshold {} outside [0,1]", score_threshold));
  }
}

std::string note_id_for(NoteKind kind, std::size_t utterance_index) {
  return fmt::format("{}-{}", kind == NoteKind::kKeyPoint ? "kp" : "ai",
                     utterance_index);
}

std::string fit_context(const Transcript& t, const UtteranceSpan& span,
                        std::size_t center, std::size_t budget) {
  std::deque<std::size_t> order;
  for (auto i = span.first; i <= span.last; ++i) {
    if (i != center) order.push_back(i);
  }
  auto render = [&] {
    std::string out;
    for (auto i : order) {
      if (!out.empty()) out.push_back('\n');
      out += t[i].speaker + ": " + t[i].text;
    }
    return out;
  };
  auto rendered = render();
  while (!order.empty() && estimate_tokens(rendered) > budget) {
    const auto front_dist = center > order.front() ? center - order.front() : 0;
    const auto back_dist = order.back() > center ? order.back() - center : 0;
    if (back_dist >= front_dist) {
      order.pop_back();
    } else {
      order.pop_front();
    }
    rendered = render();
  }
  return rendered;
}

std::vector<HighlightCandidate> detect_highlights(const Transcript& t,
                                                  Backend& backend,
                                                  const HighlightsConfig& cfg) {
  cfg.validate();
  if (t.empty()) throw Error(ErrorCode::kEmptyTranscript, "no utterances to score");
  std::vector<ClassifyScores> scores(t.size());
  parallel_for(t.size(), backend.max_parallel(), [&](std::size_t i) {
    BackendRequest req;
    req.capability = Capability::kClassify;
    req.task = ClassifyTask::kHighlight;
    req.focus_text = t[i].text;
    req.token_budget = cfg.extract_context_tokens;
    req.context_text = fit_context(t, context_window(t, i, cfg.extract_context_tokens),
                                   i, cfg.extract_context_tokens);
    scores[i] = backend.invoke(req).scores;
  });

  std::vector<HighlightCandidate> out;
  for (auto kind : {NoteKind::kKeyPoint, NoteKind::kActionItem}) {
    std::vector<HighlightCandidate> pool;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double s = kind == NoteKind::kKeyPoint ? scores[i].key_point
                                                   : scores[i].action_item;
      if (s >= cfg.score_threshold) pool.push_back({i, kind, s});
    }
    std::stable_sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.utterance_index < b.utterance_index;
    });
    if (pool.size() > cfg.max_notes) pool.resize(cfg.max_notes);
    out.insert(out.end(), pool.begin(), pool.end());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.utterance_index != b.utterance_index) {
      return a.utterance_index < b.utterance_index;
    }
    return a.kind < b.kind;
  });
  return out;
}

Note abstract_highlight(const HighlightCandidate& c, const Transcript& t,
                        Backend& backend, const HighlightsConfig& cfg) {
  const auto& anchor = t.at(c.utterance_index);
  BackendRequest req;
  req.capability = Capability::kRewrite;
  req.focus_text = anchor.speaker + ": " + anchor.text;
  req.token_budget = cfg.abstract_context_tokens;
  req.context_text =
      fit_context(t, context_window(t, c.utterance_index, cfg.abstract_context_tokens),
                  c.utterance_index, cfg.abstract_context_tokens);
  auto resp = backend.invoke(req);
  auto summary = std::string(text::trim(resp.text));
  if (summary.empty()) {
    throw Error(ErrorCode::kEmptyRewrite,
                fmt::format("backend returned a blank rewrite for utterance {}",
                            c.utterance_index));
  }
  Note note;
  note.note_id = note_id_for(c.kind, c.utterance_index);
  note.kind = c.kind;
  note.summary = std::move(summary);
  note.anchor = {c.utterance_index, c.utterance_index};
  note.context = display_context(t, note.anchor, cfg.display_context_utterances);
  note.origin = Origin::kModel;
  if (c.kind == NoteKind::kActionItem) note.assignee = anchor.speaker;
  return note;
}

HighlightsView build_highlights_view(std::vector<Note> notes) {
  HighlightsView view;
  for (auto& n : notes) view.list(n.kind).push_back(std::move(n));
  for (auto* lst : {&view.key_points, &view.action_items}) {
    std::stable_sort(lst->begin(), lst->end(), [](const Note& a, const Note& b) {
      if (a.position != b.position) return a.position < b.position;
      return a.anchor.first < b.anchor.first;
    });
    for (std::size_t i = 0; i < lst->size(); ++i) (*lst)[i].position = i;
  }
  return view;
}

HighlightsView run_highlights(const Transcript& t, Backend& backend,
                              const HighlightsConfig& cfg) {
  const auto candidates = detect_highlights(t, backend, cfg);
  std::vector<std::optional<Note>> notes(candidates.size());
  parallel_for(candidates.size(), backend.max_parallel(), [&](std::size_t i) {
    try {
      notes[i] = abstract_highlight(candidates[i], t, backend, cfg);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyRewrite) throw;
      logger().warn("dropping {} candidate at utterance {}: {}",
                    to_string(candidates[i].kind), candidates[i].utterance_index,
                    e.what());
    }
  });
  std::vector<Note> kept;
  std::size_t kp = 0, ai = 0;
  for (auto& n : notes) {
    if (!n) continue;
    n->position = n->kind == NoteKind::kKeyPoint ? kp++ : ai++;
    kept.push_back(std::move(*n));
  }
  return build_highlights_view(std::move(kept));
}

}  // namespace recap
