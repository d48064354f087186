#include "recap/backend.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "recap/error.hpp"
#include "recap/text.hpp"
#include "recap/transcript.hpp"

namespace recap {
namespace {

using Phrase = std::vector<std::string_view>;

const std::vector<Phrase>& action_cues() {
  static const std::vector<Phrase> cues = [] {
    std::vector<Phrase> c = {{"i", "will"},     {"i'll"},         {"we", "will"},
                             {"we'll"},         {"action", "item"}, {"todo"},
                             {"to-do"},         {"assigned", "to"}};
    for (std::string_view day : {"monday", "tuesday", "wednesday", "thursday",
                                 "friday", "saturday", "sunday"}) {
      c.push_back({"by", day});
    }
    return c;
  }();
  return cues;
}

const std::vector<Phrase>& key_point_cues() {
  static const std::vector<Phrase> cues = {{"we", "decided"},
                                           {"the", "main", "point"},
                                           {"importantly"},
                                           {"key", "takeaway"},
                                           {"agreed", "that"}};
  return cues;
}

// Folds the typographic apostrophe to ASCII so "I’ll" matches "i'll".
std::string fold_apostrophes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.substr(i).starts_with("\xE2\x80\x99")) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

bool contains_phrase(const std::vector<std::string>& words, const Phrase& p) {
  if (p.size() > words.size()) return false;
  for (std::size_t i = 0; i + p.size() <= words.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < p.size() && match; ++k) {
      match = words[i + k] == p[k];
    }
    if (match) return true;
  }
  return false;
}

bool any_cue(const std::vector<std::string>& words,
             const std::vector<Phrase>& cues) {
  return std::any_of(cues.begin(), cues.end(),
                     [&](const Phrase& p) { return contains_phrase(words, p); });
}

double cosine(const std::vector<std::string>& a,
              const std::vector<std::string>& b) {
  std::map<std::string_view, double> va, vb;
  for (const auto& t : a) va[t] += 1.0;
  for (const auto& t : b) vb[t] += 1.0;
  double dot = 0, na = 0, nb = 0;
  for (const auto& [k, v] : va) {
    na += v * v;
    if (auto it = vb.find(k); it != vb.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : vb) nb += v * v;
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Token {
  std::string lead;
  std::string core;
  std::string trail;
};

Token split_token(std::string_view word) {
  auto is_core = [](unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
  };
  std::size_t b = 0, e = word.size();
  while (b < e && !is_core(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && !is_core(static_cast<unsigned char>(word[e - 1]))) --e;
  return {std::string(word.substr(0, b)), std::string(word.substr(b, e - b)),
          std::string(word.substr(e))};
}

std::string capitalize_first(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// Lowercases the first letter unless the first word looks like an acronym
// ("API", "Q3") or a name acting as the subject ("Priya will ...").
std::string decapitalize_first(std::string s) {
  static const std::set<std::string, std::less<>> kSubjectVerbs = {
      "will", "would", "can", "could", "should", "said", "says", "thinks", "wants", "and"};
  const auto words = text::split_whitespace(s);
  if (words.size() >= 2 && kSubjectVerbs.contains(text::to_lower(words[1]))) return s;
  if (s.size() >= 2 && s[0] >= 'A' && s[0] <= 'Z' && s[1] >= 'a' && s[1] <= 'z') {
    s[0] = static_cast<char>(s[0] - 'A' + 'a');
  } else if (s.starts_with("A ")) {
    s[0] = 'a';
  }
  return s;
}

bool ends_with_terminal(std::string_view s) {
  return !s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?');
}

bool contains_word(const std::string& haystack, std::string_view name) {
  for (auto w : text::split_whitespace(haystack)) {
    auto tok = split_token(w);
    if (tok.core == name || tok.core == std::string(name) + "'s") return true;
  }
  // Multi-word names.
  return name.find(' ') != std::string_view::npos &&
         haystack.find(name) != std::string::npos;
}

struct SpeakerLine {
  std::string speaker;
  std::string text;
};

std::vector<SpeakerLine> split_focus(std::string_view focus) {
  std::vector<SpeakerLine> out;
  std::size_t pos = 0;
  while (pos <= focus.size()) {
    auto nl = focus.find('\n', pos);
    if (nl == std::string_view::npos) nl = focus.size();
    auto line = text::trim(focus.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon != std::string_view::npos && colon > 0 &&
        text::count_words(line.substr(0, colon)) <= 5) {
      out.push_back({std::string(text::trim(line.substr(0, colon))),
                     text::collapse_whitespace(line.substr(colon + 1))});
    } else {
      out.push_back({"The speaker", text::collapse_whitespace(line)});
    }
  }
  return out;
}

bool is_clause_break(std::string_view s, std::size_t i) {
  const char c = s[i];
  if (c == '.' || c == '?' || c == '!' || c == ';' || c == ',') return true;
  return s.substr(i).starts_with("\xE2\x80\xA6") ||  // …
         s.substr(i).starts_with("\xE2\x80\x94");    // em dash
}

std::vector<std::string_view> clauses(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_clause_break(s, i)) {
      if (i > start) out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  if (start < s.size()) out.push_back(s.substr(start));
  return out;
}

constexpr std::size_t kTitleContentWords = 6;
constexpr std::size_t kSentenceMaxWords = 24;
// Multi-line rewrites keep this many source lines.
constexpr std::size_t kSummaryLines = 2;

std::string title_from_clause(std::string_view clause) {
  std::vector<std::string> words;
  std::size_t content = 0;
  for (auto w : text::split_whitespace(clause)) {
    auto tok = split_token(w);
    if (tok.core.empty()) continue;
    const bool stop = text::is_stop_word(text::to_lower(tok.core));
    if (words.empty() && stop) continue;
    if (!stop && content == kTitleContentWords) break;
    words.push_back(tok.core);
    if (!stop) ++content;
  }
  while (!words.empty() && text::is_stop_word(text::to_lower(words.back()))) {
    words.pop_back();
  }
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return capitalize_first(std::move(out));
}

}  // namespace

std::string_view to_string(Capability c) {
  switch (c) {
    case Capability::kClassify: return "classify";
    case Capability::kRewrite: return "rewrite";
    case Capability::kTitle: return "title";
  }
  return "classify";
}

std::string_view to_string(TitleStyle s) {
  return s == TitleStyle::kTitle ? "title" : "sentence";
}

std::string_view to_string(ClassifyTask t) {
  return t == ClassifyTask::kHighlight ? "highlight" : "boundary";
}

void BackendRequest::validate() const {
  if ((capability == Capability::kClassify ||
       capability == Capability::kRewrite) &&
      text::trim(focus_text).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("{} request with empty focus text",
                            to_string(capability)));
  }
  if (estimate_tokens(context_text) > token_budget) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("context of {} tokens exceeds budget {}",
                            estimate_tokens(context_text), token_budget));
  }
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// ---------------------------------------------------------------------------
// Stub

namespace stub {

ClassifyScores classify_highlight(std::string_view utterance) {
  const auto words = text::terms(fold_apostrophes(utterance));
  ClassifyScores s;
  s.action_item = any_cue(words, action_cues()) ? kCueHitScore : 0.0;
  s.key_point = any_cue(words, key_point_cues()) ? kCueHitScore : 0.0;
  return s;
}

double boundary_score(std::string_view focus, std::string_view context) {
  if (text::trim(context).empty()) return 0.0;
  const auto sim = cosine(text::content_terms(focus), text::content_terms(context));
  return std::clamp(1.0 - sim, 0.0, 1.0);
}

std::string rewrite_line(std::string_view speaker, std::string_view line) {
  const std::string name(speaker);
  const std::string possessive = name + "'s";
  std::vector<std::string> out;
  bool after_subject = false;
  static const std::set<std::string, std::less<>> kFillers = {
      "so", "well", "okay", "ok", "um", "uh", "and", "but", "yeah", "alright"};
  const auto folded = fold_apostrophes(line);
  auto words = text::split_whitespace(folded);
  std::size_t skip = 0;
  while (skip + 1 < words.size()) {
    const auto tok = split_token(words[skip]);
    const bool ends_sentence = tok.trail.find_first_of(".?!") != std::string::npos;
    if (ends_sentence || !kFillers.contains(text::to_lower(tok.core))) break;
    ++skip;
  }
  for (std::size_t wi = skip; wi < words.size(); ++wi) {
    const auto raw = words[wi];
    auto tok = split_token(raw);
    const auto lower = text::to_lower(tok.core);
    std::string replacement;
    bool subject = false;
    if (lower == "i") {
      replacement = name;
      subject = true;
    } else if (lower == "i'm") {
      replacement = name + " is";
    } else if (lower == "i've") {
      replacement = name + " has";
    } else if (lower == "i'll") {
      replacement = name + " will";
    } else if (lower == "i'd") {
      replacement = name + " would";
    } else if (lower == "me") {
      replacement = name;
    } else if (lower == "my" || lower == "mine") {
      replacement = possessive;
    } else if (lower == "myself" || lower == "ourselves") {
      replacement = "themselves";
    } else if (lower == "we") {
      replacement = "the team";
      subject = true;
    } else if (lower == "we're") {
      replacement = "the team is";
    } else if (lower == "we've") {
      replacement = "the team has";
    } else if (lower == "we'll") {
      replacement = "the team will";
    } else if (lower == "we'd") {
      replacement = "the team would";
    } else if (lower == "us") {
      replacement = "the team";
    } else if (lower == "our" || lower == "ours") {
      replacement = "the team's";
    } else if (after_subject && (lower == "am" || lower == "are")) {
      replacement = "is";
    } else if (after_subject && lower == "have") {
      replacement = "has";
    } else if (after_subject && lower == "were") {
      replacement = "was";
    } else if (lower == "gonna") {
      replacement = "will";
      if (!out.empty() && (out.back() == "is" || out.back() == "are" ||
                           out.back() == "am")) {
        out.pop_back();
      }
    }
    after_subject = subject;
    if (replacement.empty()) {
      out.push_back(std::string(raw));
    } else {
      out.push_back(tok.lead + replacement + tok.trail);
    }
  }
  std::string sentence;
  for (const auto& w : out) {
    if (!sentence.empty()) sentence.push_back(' ');
    sentence += w;
  }
  if (sentence.empty()) return sentence;
  if (!contains_word(sentence, name)) {
    if (sentence.back() == '?') {
      sentence = name + " asked: " + decapitalize_first(std::move(sentence));
    } else {
      sentence = name + " noted that " + decapitalize_first(std::move(sentence));
    }
  }
  sentence = capitalize_first(std::move(sentence));
  if (!ends_with_terminal(sentence)) {
    while (!sentence.empty() && (sentence.back() == ',' || sentence.back() == ';' ||
                                 sentence.back() == ':')) {
      sentence.pop_back();
    }
    sentence.push_back('.');
  }
  return sentence;
}

std::string rewrite(std::string_view focus) {
  auto lines = split_focus(focus);
  if (lines.size() > kSummaryLines) {
    // Keep the lines sharing the most content terms with the rest.
    std::vector<std::set<std::string>> terms;
    for (const auto& l : lines) {
      const auto t = text::content_terms(l.text);
      terms.emplace_back(t.begin(), t.end());
    }
    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (score, index)
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::size_t score = 0;
      for (const auto& term : terms[i]) {
        for (std::size_t j = 0; j < lines.size(); ++j) score += j != i && terms[j].contains(term);
      }
      ranked.emplace_back(score, i);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < kSummaryLines; ++k) keep.push_back(ranked[k].second);
    std::sort(keep.begin(), keep.end());
    std::vector<SpeakerLine> kept;
    for (auto i : keep) kept.push_back(std::move(lines[i]));
    lines = std::move(kept);
  }
  std::string out;
  for (const auto& line : lines) {
    auto r = rewrite_line(line.speaker, line.text);
    if (r.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += r;
  }
  return out;
}

std::string title(std::string_view focus, TitleStyle style) {
  const auto lines = split_focus(focus);
  if (style == TitleStyle::kSentence) {
    for (const auto& line : lines) {
      auto words = text::split_whitespace(line.text);
      if (words.empty()) continue;
      std::string clipped;
      for (std::size_t i = 0; i < std::min(words.size(), kSentenceMaxWords); ++i) {
        if (!clipped.empty()) clipped.push_back(' ');
        clipped += words[i];
      }
      return rewrite_line(line.speaker, clipped);
    }
    return {};
  }
  for (const auto& line : lines) {
    for (auto clause : clauses(line.text)) {
      auto t = title_from_clause(clause);
      if (!t.empty()) return t;
    }
  }
  return {};
}

}  // namespace stub

BackendResponse StubBackend::invoke(const BackendRequest& req) {
  req.validate();
  BackendResponse resp;
  resp.capability = req.capability;
  switch (req.capability) {
    case Capability::kClassify:
      if (req.task == ClassifyTask::kBoundary) {
        resp.scores.boundary = stub::boundary_score(req.focus_text, req.context_text);
      } else {
        resp.scores = stub::classify_highlight(req.focus_text);
      }
      break;
    case Capability::kRewrite:
      resp.text = stub::rewrite(req.focus_text);
      break;
    case Capability::kTitle:
      resp.text = stub::title(req.focus_text, req.style.value_or(TitleStyle::kTitle));
      break;
  }
  return resp;
}

// ---------------------------------------------------------------------------
// Journal

RequestJournal::RequestJournal(Verbosity verbosity,
                               std::optional<std::filesystem::path> file)
    : verbosity_(verbosity) {
  if (file) {
    file_.emplace(*file, std::ios::app);
    if (!*file_) {
      throw Error(ErrorCode::kIo,
                  fmt::format("cannot open journal {}", file->string()));
    }
  }
}

void RequestJournal::append(JournalEntry entry) {
  if (verbosity_ == Verbosity::kDefault) {
    entry.focus_text.reset();
    entry.context_text.reset();
  }
  std::lock_guard lock(mu_);
  if (file_) {
    *file_ << to_json(entry).dump() << '\n';
    file_->flush();
  }
  entries_.push_back(std::move(entry));
}

std::vector<JournalEntry> RequestJournal::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t RequestJournal::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

nlohmann::json to_json(const JournalEntry& e) {
  nlohmann::json j = {{"at_ms", e.at_ms},
                      {"capability", std::string(to_string(e.capability))},
                      {"token_count", e.token_count},
                      {"attempt", e.attempt},
                      {"outcome", e.outcome}};
  if (e.focus_text) j["focus"] = *e.focus_text;
  if (e.context_text) j["context"] = *e.context_text;
  return j;
}

BackendResponse JournalingBackend::invoke(const BackendRequest& req) {
  JournalEntry entry;
  entry.at_ms = now_ms();
  entry.capability = req.capability;
  entry.token_count =
      estimate_tokens(req.focus_text) + estimate_tokens(req.context_text);
  entry.focus_text = req.focus_text;
  entry.context_text = req.context_text;
  try {
    auto resp = inner_.invoke(req);
    entry.outcome = "ok";
    journal_->append(std::move(entry));
    return resp;
  } catch (const Error& e) {
    entry.outcome = e.code() == ErrorCode::kInvalidArgument ? "rejected" : "error";
    journal_->append(std::move(entry));
    throw;
  }
}

void ConcurrencyLimit::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void ConcurrencyLimit::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

}  // namespace recap
