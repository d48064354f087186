#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recap {

// Inclusive range of utterance indices.
struct UtteranceSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t size() const { return last - first + 1; }
  bool contains(std::size_t i) const { return first <= i && i <= last; }
  bool contains(const UtteranceSpan& o) const {
    return first <= o.first && o.last <= last;
  }
  bool operator==(const UtteranceSpan&) const = default;
};

struct Utterance {
  std::size_t index = 0;
  std::string speaker;
  std::int64_t start_ms = 0;
  std::optional<std::int64_t> end_ms;
  std::string text;
  std::size_t word_count = 0;

  bool operator==(const Utterance&) const = default;
};

enum class SourceFormat { kPlainSpeaker, kSrt, kWebVtt };

std::string_view to_string(SourceFormat f);
// Accepts "plain", "srt", "vtt" and the long names; throws kInvalidArgument.
SourceFormat source_format_from_string(std::string_view s);

// Word/token conversion: 1 word = 4/3 tokens, nominal utterance = 8 words.
// Kept as an integer ratio so budgets are exact.
struct TokenBudget {
  static constexpr std::size_t kTokensPerWordNum = 4;
  static constexpr std::size_t kTokensPerWordDen = 3;
  static constexpr std::size_t kWordsPerUtteranceNominal = 8;
};

// ceil(words * 4/3).
constexpr std::size_t tokens_for_words(std::size_t words) {
  return (words * TokenBudget::kTokensPerWordNum +
          TokenBudget::kTokensPerWordDen - 1) /
         TokenBudget::kTokensPerWordDen;
}

std::size_t estimate_tokens(std::string_view text);

// Consecutive same-speaker lines closer than this are merged on parse.
inline constexpr std::int64_t kSameSpeakerMergeGapMs = 2000;

// An ordered, validated utterance sequence. Immutable once built.
class Transcript {
 public:
  Transcript() = default;

  // Normalizes whitespace in every text, renumbers indices 0..n-1 and
  // recomputes word counts. Throws kInvalidArgument when a text is blank, a
  // speaker is empty, or start times decrease. An empty meeting_id is
  // replaced by one derived from the content hash.
  Transcript(std::vector<Utterance> utterances, SourceFormat format,
             std::string meeting_id = {});

  const std::string& meeting_id() const { return meeting_id_; }
  SourceFormat source_format() const { return format_; }
  std::span<const Utterance> utterances() const { return utterances_; }
  std::size_t size() const { return utterances_.size(); }
  bool empty() const { return utterances_.empty(); }
  const Utterance& operator[](std::size_t i) const { return utterances_[i]; }
  const Utterance& at(std::size_t i) const;

  // Distinct speakers in order of first appearance.
  std::vector<std::string> speakers() const;

  bool operator==(const Transcript&) const = default;

 private:
  std::string meeting_id_;
  SourceFormat format_ = SourceFormat::kPlainSpeaker;
  std::vector<Utterance> utterances_;
};

struct ParseOptions {
  std::optional<SourceFormat> format_hint;
  std::int64_t merge_gap_ms = kSameSpeakerMergeGapMs;
  std::string meeting_id;
};

// Throws kMalformedInput for undecodable bytes or input with no parseable
// line, kEmptyTranscript when nothing but whitespace/headers remain.
Transcript parse_transcript(std::string_view raw, const ParseOptions& opts = {});

SourceFormat sniff_format(std::string_view raw);

// `[HH:MM:SS] Speaker: text` lines; re-parses to an identical transcript.
std::string serialize_plain(const Transcript& t);

// Canonical structured form: compact JSON, sorted keys, no meeting id.
// Byte-stable for identical content.
std::string to_canonical(const Transcript& t);
Transcript transcript_from_canonical(std::string_view canonical,
                                     std::string meeting_id = {});

// SHA-256 (hex) of to_canonical(t).
std::string content_hash(const Transcript& t);

std::size_t span_words(const Transcript& t, const UtteranceSpan& span);
// Token estimate of the span's concatenated text.
std::size_t span_tokens(const Transcript& t, const UtteranceSpan& span);

// Largest contiguous span around `center` whose token estimate stays within
// budget. Grows one utterance at a time, alternating before/after starting
// with before; a side stops once its next utterance no longer fits. The
// center is always included even when it alone exceeds the budget.
UtteranceSpan context_window(const Transcript& t, std::size_t center,
                             std::size_t token_budget);

// `span` widened by `radius` utterances each way, clamped to the transcript.
UtteranceSpan display_context(const Transcript& t, const UtteranceSpan& anchor,
                              std::size_t radius);

// Utterance texts joined with newlines, optionally "Speaker: " prefixed,
// skipping `exclude` when given.
std::string render_span(const Transcript& t, const UtteranceSpan& span,
                        bool with_speakers,
                        std::optional<std::size_t> exclude = std::nullopt);

std::string format_timestamp(std::int64_t ms);

}  // namespace recap
