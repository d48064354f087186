#include "recap/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "recap/backend.hpp"
#include "recap/error.hpp"
#include "recap/parallel.hpp"
#include "recap/text.hpp"

namespace recap {
namespace {

using TermCounts = std::unordered_map<std::string, double>;

TermCounts block_counts(const std::vector<TermCounts>& per_utt, std::size_t first,
                        std::size_t last) {
  TermCounts out;
  for (auto i = first; i <= last; ++i) {
    for (const auto& [term, c] : per_utt[i]) out[term] += c;
  }
  return out;
}

double cosine(const TermCounts& a, const TermCounts& b) {
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  double dot = 0.0;
  for (const auto& [term, c] : small) {
    if (auto it = large.find(term); it != large.end()) dot += c * it->second;
  }
  double na = 0.0, nb = 0.0;
  for (const auto& [term, c] : a) na += c * c;
  for (const auto& [term, c] : b) nb += c * c;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

void SegmentationConfig::validate() const {
  if (stride_utterances == 0 || stride_utterances > window_utterances) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("need 0 < stride ({}) <= window ({})",
                            stride_utterances, window_utterances));
  }
  if (!(boundary_threshold >= 0.0 && boundary_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("boundary threshold {} outside [0,1]",
                            boundary_threshold));
  }
}

SegmentList::SegmentList(std::vector<UtteranceSpan> ranges)
    : ranges_(std::move(ranges)) {
  std::size_t expected = 0;
  for (const auto& r : ranges_) {
    if (r.first != expected || r.last < r.first) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("segment ({},{}) breaks the partition at {}",
                              r.first, r.last, expected));
    }
    expected = r.last + 1;
  }
}

SegmentList SegmentList::from_boundaries(const std::vector<std::size_t>& starts,
                                         std::size_t n) {
  if (n == 0) return SegmentList{};
  if (starts.empty() || starts.front() != 0) {
    throw Error(ErrorCode::kInvalidArgument, "first boundary must be 0");
  }
  std::vector<UtteranceSpan> ranges;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto end = i + 1 < starts.size() ? starts[i + 1] : n;
    if (end <= starts[i] || end > n) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("boundaries must be increasing and < {}", n));
    }
    ranges.push_back({starts[i], end - 1});
  }
  return SegmentList(std::move(ranges));
}

std::vector<std::size_t> SegmentList::boundaries() const {
  std::vector<std::size_t> out;
  out.reserve(ranges_.size());
  for (const auto& r : ranges_) out.push_back(r.first);
  return out;
}

std::vector<std::size_t> SegmentList::labels() const {
  std::vector<std::size_t> out(length());
  for (std::size_t s = 0; s < ranges_.size(); ++s) {
    for (auto i = ranges_[s].first; i <= ranges_[s].last; ++i) out[i] = s;
  }
  return out;
}

std::vector<UtteranceSpan> sliding_windows(std::size_t n,
                                           const SegmentationConfig& cfg) {
  cfg.validate();
  std::vector<UtteranceSpan> out;
  if (n == 0) return out;
  for (std::size_t start = 0;; start += cfg.stride_utterances) {
    const auto end = std::min(start + cfg.window_utterances - 1, n - 1);
    out.push_back({start, end});
    if (end == n - 1) break;
  }
  return out;
}

BoundaryScores aggregate_max_pool(std::size_t n,
                                  std::span<const WindowScores> fragments) {
  std::vector<double> best(n, 0.0);
  std::vector<bool> covered(n, false);
  for (const auto& f : fragments) {
    if (f.window.last < f.window.first || f.window.last >= n ||
        f.scores.size() != f.window.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("fragment ({},{}) with {} scores invalid for n={}",
                              f.window.first, f.window.last, f.scores.size(), n));
    }
    for (std::size_t k = 0; k < f.scores.size(); ++k) {
      const auto pos = f.window.first + k;
      best[pos] = covered[pos] ? std::max(best[pos], f.scores[k]) : f.scores[k];
      covered[pos] = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!covered[i]) {
      throw Error(ErrorCode::kUncoveredPosition,
                  fmt::format("position {} not covered by any window", i));
    }
  }
  if (n > 0) best[0] = 1.0;
  return {std::move(best)};
}

SegmentList scores_to_segments(const BoundaryScores& scores,
                               const SegmentationConfig& cfg) {
  cfg.validate();
  const auto n = scores.size();
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "cannot segment zero positions");
  }
  std::vector<std::size_t> kept{0};
  for (std::size_t i = 1; i < n; ++i) {
    if (scores[i] >= cfg.boundary_threshold &&
        i - kept.back() >= cfg.min_segment_utterances) {
      kept.push_back(i);
    }
  }
  return SegmentList::from_boundaries(kept, n);
}

std::vector<double> gap_similarities(const Transcript& t,
                                     std::size_t block_utterances) {
  const auto n = t.size();
  if (n < 2) {
    throw Error(ErrorCode::kTranscriptTooShort,
                fmt::format("lexical cohesion needs >= 2 utterances, got {}", n));
  }
  if (block_utterances == 0) {
    throw Error(ErrorCode::kInvalidArgument, "block size must be positive");
  }
  std::vector<TermCounts> per_utt(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& term : text::content_terms(t[i].text)) per_utt[i][term] += 1.0;
  }
  std::vector<double> sim(n, 1.0);
  for (std::size_t gap = 1; gap < n; ++gap) {
    const auto left_first = gap >= block_utterances ? gap - block_utterances : 0;
    const auto right_last = std::min(n - 1, gap + block_utterances - 1);
    sim[gap] = cosine(block_counts(per_utt, left_first, gap - 1),
                      block_counts(per_utt, gap, right_last));
  }
  return sim;
}

BoundaryScores lexical_cohesion_scores(const Transcript& t,
                                       std::size_t block_utterances) {
  const auto sim = gap_similarities(t, block_utterances);
  const auto n = t.size();
  std::vector<double> depth(n, 0.0);
  double max_depth = 0.0;
  for (std::size_t gap = 1; gap < n; ++gap) {
    // Hill-climb to the nearest peak on each side.
    auto l = gap;
    while (l > 1 && sim[l - 1] >= sim[l]) --l;
    auto r = gap;
    while (r + 1 < n && sim[r + 1] >= sim[r]) ++r;
    depth[gap] = (sim[l] - sim[gap]) + (sim[r] - sim[gap]);
    max_depth = std::max(max_depth, depth[gap]);
  }
  std::vector<double> scores(n, 0.0);
  if (max_depth > 0.0) {
    for (std::size_t gap = 1; gap < n; ++gap) scores[gap] = depth[gap] / max_depth;
  }
  scores[0] = 1.0;
  return {std::move(scores)};
}

SegmentationMetrics evaluate_segmentation(const SegmentList& predicted,
                                          const SegmentList& gold,
                                          std::optional<std::size_t> k) {
  const auto n = gold.length();
  if (predicted.length() != n) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("predicted covers {} positions, gold covers {}",
                            predicted.length(), n));
  }
  SegmentationMetrics m;
  if (n == 0) return m;
  if (!k) {
    const double mean_len = static_cast<double>(n) / static_cast<double>(gold.size());
    k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(mean_len / 2.0)));
  }
  if (*k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  m.k = *k;
  if (*k >= n) return m;

  const auto ref = gold.labels();
  const auto hyp = predicted.labels();
  std::size_t pk_err = 0;
  std::size_t wd_err = 0;
  const auto probes = n - *k;
  for (std::size_t i = 0; i < probes; ++i) {
    const auto j = i + *k;
    // Labels increase by one per boundary, so the difference counts the
    // boundaries inside (i, j].
    const auto ref_b = ref[j] - ref[i];
    const auto hyp_b = hyp[j] - hyp[i];
    if ((ref_b == 0) != (hyp_b == 0)) ++pk_err;
    if (ref_b != hyp_b) ++wd_err;
  }
  m.pk = static_cast<double>(pk_err) / static_cast<double>(probes);
  m.window_diff = static_cast<double>(wd_err) / static_cast<double>(probes);
  return m;
}

void LexicalCohesionScorer::prepare(const Transcript& t) {
  if (t.size() < 2) {
    scores_.values.assign(t.size(), 1.0);
    return;
  }
  scores_ = lexical_cohesion_scores(t, block_);
}

std::vector<double> LexicalCohesionScorer::score_window(
    const Transcript& t, const UtteranceSpan& window) {
  if (scores_.size() != t.size()) prepare(t);
  return {scores_.values.begin() + static_cast<std::ptrdiff_t>(window.first),
          scores_.values.begin() + static_cast<std::ptrdiff_t>(window.last) + 1};
}

std::vector<double> RemoteBoundaryScorer::score_window(
    const Transcript& t, const UtteranceSpan& window) {
  std::vector<double> out(window.size(), 0.0);
  for (auto pos = window.first; pos <= window.last; ++pos) {
    if (pos == window.first) continue;
    // Nearest preceding in-window utterances that fit the budget.
    auto first = pos;
    std::size_t words = 0;
    while (first > window.first && pos - first < context_utterances_ &&
           tokens_for_words(words + t[first - 1].word_count) <= token_budget_) {
      --first;
      words += t[first].word_count;
    }
    if (first == pos) continue;
    BackendRequest req;
    req.capability = Capability::kClassify;
    req.task = ClassifyTask::kBoundary;
    req.focus_text = t[pos].text;
    req.context_text = render_span(t, {first, pos - 1}, false);
    req.token_budget = token_budget_;
    out[pos - window.first] =
        std::clamp(backend_.invoke(req).scores.boundary, 0.0, 1.0);
  }
  return out;
}

std::size_t RemoteBoundaryScorer::max_parallel() const {
  return backend_.max_parallel();
}

SegmentList segment_transcript(const Transcript& t, BoundaryScorer& scorer,
                               const SegmentationConfig& cfg) {
  cfg.validate();
  const auto n = t.size();
  if (n == 0) throw Error(ErrorCode::kEmptyTranscript, "nothing to segment");
  if (n == 1) return SegmentList({{0, 0}});
  scorer.prepare(t);
  const auto windows = sliding_windows(n, cfg);
  std::vector<WindowScores> fragments(windows.size());
  parallel_for(windows.size(), scorer.max_parallel(), [&](std::size_t w) {
    fragments[w] = {windows[w], scorer.score_window(t, windows[w])};
  });
  return scores_to_segments(aggregate_max_pool(n, fragments), cfg);
}

}  // namespace recap
