#include "recap/transcript.hpp"

#include <algorithm>
#include <charconv>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include <fmt/format.h>

#include "recap/error.hpp"
#include "recap/hash.hpp"
#include "recap/text.hpp"

namespace recap {
namespace {

using nlohmann::json;

constexpr std::string_view kUnknownSpeaker = "Unknown";
constexpr std::size_t kMaxSpeakerBytes = 64;
constexpr std::size_t kMaxSpeakerWords = 5;

struct RawLine {
  std::string speaker;
  std::optional<std::int64_t> start_ms;
  std::optional<std::int64_t> end_ms;
  std::string text;
};

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto nl = s.find('\n', pos);
    if (nl == std::string_view::npos) nl = s.size();
    auto line = s.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

std::string_view strip_bom(std::string_view s) {
  if (s.starts_with("\xEF\xBB\xBF")) s.remove_prefix(3);
  return s;
}

std::optional<std::int64_t> parse_uint(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0) {
    return std::nullopt;
  }
  return v;
}

// [H]H:MM:SS or MM:SS, optional fraction after '.' or ','.
std::optional<std::int64_t> parse_clock(std::string_view s) {
  s = text::trim(s);
  std::int64_t frac_ms = 0;
  auto frac = s.find_first_of(".,");
  if (frac != std::string_view::npos) {
    auto digits = s.substr(frac + 1);
    if (digits.empty() || digits.size() > 3) return std::nullopt;
    auto v = parse_uint(digits);
    if (!v) return std::nullopt;
    frac_ms = *v;
    for (auto n = digits.size(); n < 3; ++n) frac_ms *= 10;
    s = s.substr(0, frac);
  }
  std::vector<std::int64_t> parts;
  std::size_t pos = 0;
  while (true) {
    auto colon = s.find(':', pos);
    auto piece = s.substr(pos, colon == std::string_view::npos
                                   ? std::string_view::npos
                                   : colon - pos);
    auto v = parse_uint(piece);
    if (!v) return std::nullopt;
    parts.push_back(*v);
    if (colon == std::string_view::npos) break;
    pos = colon + 1;
  }
  std::int64_t h = 0, m = 0, sec = 0;
  if (parts.size() == 3) {
    h = parts[0];
    m = parts[1];
    sec = parts[2];
  } else if (parts.size() == 2) {
    m = parts[0];
    sec = parts[1];
  } else {
    return std::nullopt;
  }
  if (m >= 60 || sec >= 60) return std::nullopt;
  return ((h * 60 + m) * 60 + sec) * 1000 + frac_ms;
}

bool plausible_speaker(std::string_view name) {
  if (name.empty() || name.size() > kMaxSpeakerBytes) return false;
  if (text::count_words(name) > kMaxSpeakerWords) return false;
  if (name.find_first_of("[]<>") != std::string_view::npos) return false;
  if (text::starts_with_ci(name, "http")) return false;
  return true;
}

// Splits "Name: text". Returns nullopt when the prefix does not look like a
// speaker label.
std::optional<std::pair<std::string, std::string>> split_speaker(
    std::string_view line) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto name = text::trim(line.substr(0, colon));
  if (!plausible_speaker(name)) return std::nullopt;
  return std::pair{std::string(name),
                   text::collapse_whitespace(line.substr(colon + 1))};
}

std::string strip_tags(std::string_view s) {
  std::string out;
  bool in_tag = false;
  for (char c : s) {
    if (c == '<') {
      in_tag = true;
    } else if (c == '>' && in_tag) {
      in_tag = false;
    } else if (!in_tag) {
      out.push_back(c);
    }
  }
  return out;
}

std::string decode_entities(std::string s) {
  static constexpr std::pair<std::string_view, std::string_view> kEntities[] = {
      {"&lt;", "<"}, {"&gt;", ">"}, {"&nbsp;", " "}, {"&amp;", "&"}};
  for (auto [from, to] : kEntities) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Format-specific readers. Each returns raw lines; a count of lines that could
// not be interpreted is reported through `rejected`.

std::vector<RawLine> read_plain(std::string_view raw, std::size_t& rejected) {
  std::vector<RawLine> out;
  std::optional<std::int64_t> last_start;
  for (auto line : split_lines(raw)) {
    line = text::trim(line);
    if (line.empty()) continue;
    std::optional<std::int64_t> stamp;
    auto rest = line;
    if (rest.front() == '[') {
      auto close = rest.find(']');
      if (close != std::string_view::npos) {
        stamp = parse_clock(rest.substr(1, close - 1));
        if (stamp) rest = text::trim(rest.substr(close + 1));
      }
    }
    auto parts = split_speaker(rest);
    if (!parts) {
      // Wrapped continuation of the previous line.
      if (!out.empty() && !stamp) {
        out.back().text += " " + text::collapse_whitespace(rest);
      } else {
        ++rejected;
      }
      continue;
    }
    if (stamp) last_start = stamp;
    if (parts->second.empty()) continue;
    out.push_back({std::move(parts->first), last_start, std::nullopt,
                   std::move(parts->second)});
  }
  return out;
}

struct Cue {
  std::int64_t start_ms;
  std::int64_t end_ms;
  std::vector<std::string_view> payload;
};

// Shared by SRT and WebVTT: blocks separated by blank lines, each holding a
// "start --> end" timing line followed by payload lines.
std::vector<Cue> read_cues(std::string_view raw, bool vtt,
                           std::size_t& rejected) {
  std::vector<Cue> cues;
  auto lines = split_lines(raw);
  std::size_t i = 0;
  if (vtt) {
    // Header block runs to the first blank line.
    while (i < lines.size() && !text::trim(lines[i]).empty()) ++i;
  }
  while (i < lines.size()) {
    while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
    std::vector<std::string_view> block;
    while (i < lines.size() && !text::trim(lines[i]).empty()) {
      block.push_back(lines[i++]);
    }
    if (block.empty()) continue;
    auto head = text::trim(block.front());
    if (vtt && (head.starts_with("NOTE") || head.starts_with("STYLE") ||
                head.starts_with("REGION"))) {
      continue;
    }
    auto timing = std::find_if(block.begin(), block.end(), [](auto l) {
      return l.find("-->") != std::string_view::npos;
    });
    if (timing == block.end()) {
      ++rejected;
      continue;
    }
    auto arrow = timing->find("-->");
    auto start = parse_clock(timing->substr(0, arrow));
    auto tail = text::trim(timing->substr(arrow + 3));
    // WebVTT cue settings follow the end time.
    auto end = parse_clock(tail.substr(0, tail.find_first_of(" \t")));
    if (!start || !end) {
      ++rejected;
      continue;
    }
    cues.push_back({*start, std::max(*start, *end),
                    std::vector<std::string_view>(timing + 1, block.end())});
  }
  return cues;
}

std::vector<RawLine> cues_to_lines(const std::vector<Cue>& cues, bool vtt) {
  std::vector<RawLine> out;
  for (const auto& cue : cues) {
    std::string joined;
    for (auto l : cue.payload) {
      if (!joined.empty()) joined.push_back(' ');
      joined += text::trim(l);
    }
    std::string speaker;
    if (vtt) {
      auto v = joined.find("<v");
      if (v != std::string::npos && v + 2 < joined.size() &&
          (joined[v + 2] == ' ' || joined[v + 2] == '.')) {
        auto close = joined.find('>', v);
        auto space = joined.find(' ', v);
        if (close != std::string::npos && space != std::string::npos &&
            space < close) {
          speaker = std::string(text::trim(
              std::string_view(joined).substr(space + 1, close - space - 1)));
        }
      }
    }
    auto body = text::collapse_whitespace(decode_entities(strip_tags(joined)));
    if (speaker.empty()) {
      if (auto parts = split_speaker(body)) {
        speaker = std::move(parts->first);
        body = std::move(parts->second);
      } else {
        speaker = kUnknownSpeaker;
      }
    }
    if (body.empty()) continue;
    out.push_back({std::move(speaker), cue.start_ms, cue.end_ms,
                   std::move(body)});
  }
  return out;
}

std::vector<Utterance> merge_lines(std::vector<RawLine> lines,
                                   std::int64_t merge_gap_ms) {
  std::stable_sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) {
    return a.start_ms.value_or(0) < b.start_ms.value_or(0);
  });
  std::vector<Utterance> out;
  for (auto& line : lines) {
    const auto start = line.start_ms.value_or(0);
    if (!out.empty() && out.back().speaker == line.speaker) {
      auto& prev = out.back();
      const auto prev_end = prev.end_ms.value_or(prev.start_ms);
      if (start - prev_end <= merge_gap_ms) {
        prev.text += " " + line.text;
        if (line.end_ms) {
          prev.end_ms = std::max(prev.end_ms.value_or(0), *line.end_ms);
        }
        continue;
      }
    }
    Utterance u;
    u.speaker = std::move(line.speaker);
    u.start_ms = start;
    u.end_ms = line.end_ms;
    u.text = std::move(line.text);
    out.push_back(std::move(u));
  }
  return out;
}

json utterance_to_json(const Utterance& u) {
  json j = {{"index", u.index},
            {"speaker", u.speaker},
            {"start_ms", u.start_ms},
            {"text", u.text},
            {"word_count", u.word_count}};
  if (u.end_ms) j["end_ms"] = *u.end_ms;
  return j;
}

}  // namespace

std::string_view to_string(SourceFormat f) {
  switch (f) {
    case SourceFormat::kPlainSpeaker: return "plain";
    case SourceFormat::kSrt: return "srt";
    case SourceFormat::kWebVtt: return "vtt";
  }
  return "plain";
}

SourceFormat source_format_from_string(std::string_view s) {
  auto lower = text::to_lower(s);
  if (lower == "plain" || lower == "plainspeaker") return SourceFormat::kPlainSpeaker;
  if (lower == "srt") return SourceFormat::kSrt;
  if (lower == "vtt" || lower == "webvtt") return SourceFormat::kWebVtt;
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("unknown transcript format '{}'", s));
}

std::size_t estimate_tokens(std::string_view text) {
  return tokens_for_words(text::count_words(text));
}

Transcript::Transcript(std::vector<Utterance> utterances, SourceFormat format,
                       std::string meeting_id)
    : format_(format), utterances_(std::move(utterances)) {
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    auto& u = utterances_[i];
    u.index = i;
    u.text = text::collapse_whitespace(u.text);
    u.speaker = std::string(text::trim(u.speaker));
    u.word_count = text::count_words(u.text);
    if (u.text.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("utterance {} has empty text", i));
    }
    if (u.speaker.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("utterance {} has no speaker", i));
    }
    if (i > 0 && u.start_ms < utterances_[i - 1].start_ms) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("utterance {} starts before its predecessor", i));
    }
  }
  meeting_id_ = meeting_id.empty()
                    ? "mtg-" + content_hash(*this).substr(0, 16)
                    : std::move(meeting_id);
}

const Utterance& Transcript::at(std::size_t i) const {
  if (i >= utterances_.size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                fmt::format("utterance index {} out of range (size {})", i,
                            utterances_.size()));
  }
  return utterances_[i];
}

std::vector<std::string> Transcript::speakers() const {
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& u : utterances_) {
    if (seen.insert(u.speaker).second) out.push_back(u.speaker);
  }
  return out;
}

SourceFormat sniff_format(std::string_view raw) {
  raw = strip_bom(raw);
  auto lines = split_lines(raw);
  std::size_t i = 0;
  while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
  if (i == lines.size()) return SourceFormat::kPlainSpeaker;
  auto first = text::trim(lines[i]);
  if (first.starts_with("WEBVTT")) return SourceFormat::kWebVtt;
  if (parse_uint(first) && i + 1 < lines.size() &&
      lines[i + 1].find("-->") != std::string_view::npos) {
    return SourceFormat::kSrt;
  }
  return SourceFormat::kPlainSpeaker;
}

Transcript parse_transcript(std::string_view raw, const ParseOptions& opts) {
  if (!text::is_valid_utf8(raw)) {
    throw Error(ErrorCode::kMalformedInput, "transcript is not valid UTF-8");
  }
  raw = strip_bom(raw);
  if (text::trim(raw).empty()) {
    throw Error(ErrorCode::kEmptyTranscript, "transcript is empty");
  }
  const auto format = opts.format_hint.value_or(sniff_format(raw));
  std::size_t rejected = 0;
  std::vector<RawLine> lines;
  switch (format) {
    case SourceFormat::kPlainSpeaker:
      lines = read_plain(raw, rejected);
      break;
    case SourceFormat::kSrt:
      lines = cues_to_lines(read_cues(raw, false, rejected), false);
      break;
    case SourceFormat::kWebVtt:
      if (!text::trim(raw).starts_with("WEBVTT")) {
        throw Error(ErrorCode::kMalformedInput, "missing WEBVTT header");
      }
      lines = cues_to_lines(read_cues(raw, true, rejected), true);
      break;
  }
  if (lines.empty()) {
    if (rejected > 0) {
      throw Error(ErrorCode::kMalformedInput,
                  fmt::format("no parseable lines ({} rejected) as {}",
                              rejected, to_string(format)));
    }
    throw Error(ErrorCode::kEmptyTranscript, "transcript has no utterances");
  }
  return Transcript(merge_lines(std::move(lines), opts.merge_gap_ms), format,
                    opts.meeting_id);
}

std::string format_timestamp(std::int64_t ms) {
  const auto total_s = ms / 1000;
  const auto frac = ms % 1000;
  auto out = fmt::format("{:02}:{:02}:{:02}", total_s / 3600,
                         (total_s / 60) % 60, total_s % 60);
  if (frac != 0) out += fmt::format(".{:03}", frac);
  return out;
}

std::string serialize_plain(const Transcript& t) {
  std::string out;
  for (const auto& u : t.utterances()) {
    out += fmt::format("[{}] {}: {}\n", format_timestamp(u.start_ms), u.speaker,
                       u.text);
  }
  return out;
}

std::string to_canonical(const Transcript& t) {
  json utts = json::array();
  for (const auto& u : t.utterances()) utts.push_back(utterance_to_json(u));
  json doc = {{"schema_version", 1},
              {"source_format", std::string(to_string(t.source_format()))},
              {"utterances", std::move(utts)}};
  return doc.dump();
}

Transcript transcript_from_canonical(std::string_view canonical,
                                     std::string meeting_id) {
  try {
    auto doc = json::parse(canonical);
    std::vector<Utterance> utts;
    for (const auto& j : doc.at("utterances")) {
      Utterance u;
      u.speaker = j.at("speaker").get<std::string>();
      u.start_ms = j.at("start_ms").get<std::int64_t>();
      if (j.contains("end_ms")) u.end_ms = j.at("end_ms").get<std::int64_t>();
      u.text = j.at("text").get<std::string>();
      utts.push_back(std::move(u));
    }
    return Transcript(
        std::move(utts),
        source_format_from_string(doc.at("source_format").get<std::string>()),
        std::move(meeting_id));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedInput,
                std::string("bad canonical transcript: ") + e.what());
  }
}

std::string content_hash(const Transcript& t) {
  return sha256_hex(to_canonical(t));
}

std::size_t span_words(const Transcript& t, const UtteranceSpan& span) {
  std::size_t words = 0;
  for (auto i = span.first; i <= span.last; ++i) words += t[i].word_count;
  return words;
}

std::size_t span_tokens(const Transcript& t, const UtteranceSpan& span) {
  return tokens_for_words(span_words(t, span));
}

UtteranceSpan context_window(const Transcript& t, std::size_t center,
                             std::size_t token_budget) {
  if (center >= t.size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                fmt::format("context center {} out of range (size {})", center,
                            t.size()));
  }
  UtteranceSpan span{center, center};
  std::size_t words = t[center].word_count;
  bool before_open = center > 0;
  bool after_open = center + 1 < t.size();
  bool before_turn = true;
  while (before_open || after_open) {
    if (before_turn && before_open) {
      const auto w = t[span.first - 1].word_count;
      if (tokens_for_words(words + w) <= token_budget) {
        --span.first;
        words += w;
        before_open = span.first > 0;
      } else {
        before_open = false;
      }
    } else if (!before_turn && after_open) {
      const auto w = t[span.last + 1].word_count;
      if (tokens_for_words(words + w) <= token_budget) {
        ++span.last;
        words += w;
        after_open = span.last + 1 < t.size();
      } else {
        after_open = false;
      }
    }
    before_turn = !before_turn;
  }
  return span;
}

UtteranceSpan display_context(const Transcript& t, const UtteranceSpan& anchor,
                              std::size_t radius) {
  if (t.empty() || anchor.last >= t.size()) {
    throw Error(ErrorCode::kIndexOutOfRange, "anchor outside transcript");
  }
  return {anchor.first >= radius ? anchor.first - radius : 0,
          std::min(anchor.last + radius, t.size() - 1)};
}

std::string render_span(const Transcript& t, const UtteranceSpan& span,
                        bool with_speakers, std::optional<std::size_t> exclude) {
  std::string out;
  for (auto i = span.first; i <= span.last && i < t.size(); ++i) {
    if (exclude && *exclude == i) continue;
    if (!out.empty()) out.push_back('\n');
    if (with_speakers) {
      out += t[i].speaker;
      out += ": ";
    }
    out += t[i].text;
  }
  return out;
}

}  // namespace recap
