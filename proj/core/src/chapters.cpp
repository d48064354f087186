#include "recap/chapters.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "recap/backend.hpp"
#include "recap/error.hpp"
#include "recap/log.hpp"
#include "recap/parallel.hpp"
#include "recap/text.hpp"

namespace recap {
namespace {

constexpr std::size_t kRawExtractWords = 24;

std::string raw_extract(const Utterance& u) {
  auto words = text::split_whitespace(u.text);
  std::string out = u.speaker + ": ";
  for (std::size_t i = 0; i < std::min(words.size(), kRawExtractWords); ++i) {
    if (i > 0) out.push_back(' ');
    out += words[i];
  }
  if (words.size() > kRawExtractWords) out += " ...";
  return out;
}

// Leading utterances of the range, as "Speaker: text" lines, while the
// estimate fits the budget (always at least one line).
std::string leading_text(const Transcript& t, const UtteranceSpan& range,
                         std::size_t budget) {
  auto last = range.first;
  while (last < range.last &&
         estimate_tokens(render_span(t, {range.first, last + 1}, true)) <= budget) {
    ++last;
  }
  return render_span(t, {range.first, last}, true);
}

// Most recent earlier utterances of the chapter that fit the budget.
std::string rolling_context(const Transcript& t, const UtteranceSpan& range,
                            const UtteranceSpan& chunk, std::size_t budget) {
  if (chunk.first == range.first) return {};
  auto first = chunk.first;
  while (first > range.first &&
         estimate_tokens(render_span(t, {first - 1, chunk.first - 1}, true)) <= budget) {
    --first;
  }
  if (first == chunk.first) return {};
  return render_span(t, {first, chunk.first - 1}, true);
}

std::string require_text(BackendResponse resp, std::string_view what) {
  auto s = std::string(text::trim(resp.text));
  if (s.empty()) {
    throw BackendFailure(BackendFailureKind::kMalformedResponse,
                         fmt::format("blank {}", what));
  }
  return s;
}

Chapter build_one(const Transcript& t, const UtteranceSpan& range,
                  std::size_t ordinal, Backend& backend, const ChaptersConfig& cfg) {
  Chapter ch;
  ch.chapter_id = fmt::format("ch-{}", ordinal);
  ch.range = range;
  ch.collapsed = ordinal != 0;
  const auto chunks = chunk_range(range, cfg.chunk_size);
  try {
    BackendRequest title_req;
    title_req.capability = Capability::kTitle;
    title_req.focus_text = leading_text(t, range, cfg.context_tokens);
    title_req.token_budget = cfg.context_tokens;
    title_req.style = TitleStyle::kTitle;
    ch.title = require_text(backend.invoke(title_req), "title");
    title_req.style = TitleStyle::kSentence;
    ch.one_liner = require_text(backend.invoke(title_req), "one-liner");
    for (const auto& chunk : chunks) {
      BackendRequest req;
      req.capability = Capability::kRewrite;
      req.focus_text = render_span(t, chunk, true);
      req.context_text = rolling_context(t, range, chunk, cfg.context_tokens);
      req.token_budget = cfg.context_tokens;
      ch.rolling_notes.push_back(
          {chunk, require_text(backend.invoke(req), "rolling note"), {}, Origin::kModel});
    }
  } catch (const BackendFailure& e) {
    logger().warn("chapter {} ({}..{}) falls back to raw extracts: {}",
                  ch.chapter_id, range.first, range.last, e.what());
    ch.title = std::string(kFallbackTitle);
    ch.one_liner = raw_extract(t[range.first]);
    ch.rolling_notes.clear();
    for (const auto& chunk : chunks) {
      ch.rolling_notes.push_back({chunk, raw_extract(t[chunk.first]), {}, Origin::kModel});
    }
  }
  return ch;
}

}  // namespace

void ChaptersConfig::validate() const {
  if (chunk_size == 0 || context_tokens == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "chunk_size and context_tokens must be positive");
  }
}

std::vector<UtteranceSpan> chunk_range(const UtteranceSpan& range,
                                       std::size_t chunk_size) {
  std::vector<UtteranceSpan> out;
  for (auto start = range.first; start <= range.last; start += chunk_size) {
    out.push_back({start, std::min(start + chunk_size - 1, range.last)});
  }
  return out;
}

std::vector<Chapter> build_chapters(const Transcript& t, const SegmentList& segs,
                                    std::span<const Note> notes, Backend& backend,
                                    const ChaptersConfig& cfg) {
  cfg.validate();
  if (segs.length() != t.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("segments cover {} utterances, transcript has {}",
                            segs.length(), t.size()));
  }
  const auto& ranges = segs.ranges();
  std::vector<Chapter> chapters(ranges.size());
  parallel_for(ranges.size(), backend.max_parallel(), [&](std::size_t i) {
    chapters[i] = build_one(t, ranges[i], i, backend, cfg);
  });

  for (std::size_t i = 0; i < chapters.size(); ++i) {
    const auto& first = t[ranges[i].first];
    const auto& last = t[ranges[i].last];
    auto end = std::max(first.start_ms, last.end_ms.value_or(last.start_ms));
    if (i + 1 < chapters.size()) {
      end = std::min(end, t[ranges[i + 1].first].start_ms);
    }
    chapters[i].timespan = {first.start_ms, std::max(end, first.start_ms)};
  }

  HighlightsView view;
  for (const auto& n : notes) view.list(n.kind).push_back(n);
  refresh_markers(chapters, view);
  return chapters;
}

void refresh_markers(std::vector<Chapter>& chapters, const HighlightsView& view) {
  auto notes = view.all();
  std::stable_sort(notes.begin(), notes.end(), [](const Note* a, const Note* b) {
    if (a->anchor.first != b->anchor.first) return a->anchor.first < b->anchor.first;
    return a->note_id < b->note_id;
  });
  for (auto& ch : chapters) {
    ch.star_count = 0;
    ch.checkbox_count = 0;
    for (auto& rn : ch.rolling_notes) rn.markers.clear();
    for (const auto* n : notes) {
      if (!n->visible() || !n->marked || !ch.range.contains(n->anchor.first)) continue;
      if (n->kind == NoteKind::kKeyPoint) {
        ++ch.star_count;
      } else {
        ++ch.checkbox_count;
      }
      for (auto& rn : ch.rolling_notes) {
        if (rn.span.contains(n->anchor.first)) rn.markers.push_back(n->note_id);
      }
    }
  }
}

ChapterRendering expand_chapter(const Chapter& ch, ExpandLevel level,
                                const Transcript* t) {
  if (level == ExpandLevel::kTranscriptLinked && t == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "transcript-linked expansion needs the transcript");
  }
  ChapterRendering r;
  r.level = level;
  r.chapter_id = ch.chapter_id;
  r.title = ch.title;
  r.one_liner = ch.one_liner;
  r.timespan = ch.timespan;
  r.star_count = ch.star_count;
  r.checkbox_count = ch.checkbox_count;
  r.collapsed = level == ExpandLevel::kTitleOnly ? ch.collapsed : false;
  if (level == ExpandLevel::kTitleOnly) return r;
  for (const auto& rn : ch.rolling_notes) {
    RenderedRollingNote out{rn.span, rn.summary, rn.markers, {}};
    if (level == ExpandLevel::kTranscriptLinked) {
      for (auto i = rn.span.first; i <= rn.span.last; ++i) {
        out.refs.push_back({i, t->at(i).start_ms});
      }
    }
    r.rolling_notes.push_back(std::move(out));
  }
  return r;
}

}  // namespace recap
