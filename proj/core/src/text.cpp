#include "recap/text.hpp"

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <cctype>
#include <unordered_set>

namespace recap::text {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_alnum(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

// Function words and meeting fillers.
constexpr std::string_view kStopWords[] = {
    "a",       "about",   "above",  "after",   "again",    "against", "all",
    "also",    "am",      "an",     "and",     "any",      "are",     "as",
    "at",      "be",      "because", "been",   "before",   "being",   "below",
    "between", "both",    "but",    "by",      "can",      "could",   "did",
    "do",      "does",    "doing",  "down",    "during",   "each",    "few",
    "for",     "from",    "further", "get",    "got",      "had",     "has",
    "have",    "having",  "he",     "her",     "here",     "hers",    "herself",
    "him",     "himself", "his",    "how",     "i",        "if",      "in",
    "into",    "is",      "it",     "its",     "itself",   "just",    "let",
    "like",    "me",      "might",  "more",    "most",     "must",    "my",
    "myself",  "no",      "nor",    "not",     "now",      "of",      "off",
    "oh",      "ok",      "okay",   "on",      "once",     "only",    "or",
    "other",   "our",     "ours",   "ourselves", "out",    "over",    "own",
    "really",  "right",   "same",   "say",     "said",     "she",     "should",
    "so",      "some",    "such",   "than",    "that",     "the",     "their",
    "theirs",  "them",    "themselves", "then", "there",   "these",   "they",
    "this",    "those",   "through", "to",     "too",      "um",      "uh",
    "under",   "until",   "up",     "us",      "very",     "was",     "we",
    "well",    "were",    "what",   "when",    "where",    "which",   "while",
    "who",     "whom",    "why",    "will",    "with",     "would",   "yeah",
    "yes",     "you",     "your",   "yours",   "yourself", "yourselves",
    "going",   "gonna",   "know",   "think",   "mean",     "actually",
};

const std::unordered_set<std::string_view>& stop_words() {
  static const std::unordered_set<std::string_view> set(std::begin(kStopWords),
                                                        std::end(kStopWords));
  return set;
}

}  // namespace

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong encodings, surrogates, out of range.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

bool is_stop_word(std::string_view lowered) {
  return stop_words().contains(lowered);
}

std::vector<std::string> terms(std::string_view s) {
  std::vector<std::string> out;
  for (auto word : split_whitespace(s)) {
    std::size_t b = 0;
    std::size_t e = word.size();
    while (b < e && !is_alnum(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && !is_alnum(static_cast<unsigned char>(word[e - 1]))) --e;
    if (b == e) continue;
    out.push_back(to_lower(word.substr(b, e - b)));
  }
  return out;
}

std::vector<std::string> content_terms(std::string_view s) {
  auto all = terms(s);
  std::erase_if(all, [](const std::string& t) { return is_stop_word(t); });
  return all;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace recap::text
