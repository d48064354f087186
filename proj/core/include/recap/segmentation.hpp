#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "recap/transcript.hpp"

namespace recap {

class Backend;

struct SegmentationConfig {
  std::size_t window_utterances = 30;
  std::size_t stride_utterances = 10;
  double boundary_threshold = 0.5;
  std::size_t min_segment_utterances = 4;

  // Throws kInvalidArgument unless 0 < stride <= window and the threshold
  // lies in [0, 1].
  void validate() const;

  bool operator==(const SegmentationConfig&) const = default;
};

// Per-utterance probability that a new segment starts at that utterance.
struct BoundaryScores {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const BoundaryScores&) const = default;
};

// Scores produced for one window; scores[k] belongs to position
// window.first + k.
struct WindowScores {
  UtteranceSpan window;
  std::vector<double> scores;
};

// Ordered, contiguous ranges that exactly cover 0..n-1.
class SegmentList {
 public:
  SegmentList() = default;
  // Throws kInvalidArgument when the ranges do not partition 0..n-1 for
  // n = last end + 1.
  explicit SegmentList(std::vector<UtteranceSpan> ranges);

  // Segment starts, first one must be 0.
  static SegmentList from_boundaries(const std::vector<std::size_t>& starts,
                                     std::size_t n);

  const std::vector<UtteranceSpan>& ranges() const { return ranges_; }
  std::size_t size() const { return ranges_.size(); }
  std::size_t length() const { return ranges_.empty() ? 0 : ranges_.back().last + 1; }
  std::vector<std::size_t> boundaries() const;
  // Segment ordinal for every position.
  std::vector<std::size_t> labels() const;

  bool operator==(const SegmentList&) const = default;

 private:
  std::vector<UtteranceSpan> ranges_;
};

// Windows start at 0 and advance by the stride; the last window's end is
// clamped to n-1 so the final utterance is covered.
std::vector<UtteranceSpan> sliding_windows(std::size_t n,
                                           const SegmentationConfig& cfg);

// Per-position maximum over all fragments covering it; position 0 is forced
// to 1.0. Throws kUncoveredPosition when some position has no fragment and
// kInvalidArgument for fragments that fall outside 0..n-1 or whose score
// count does not match the window.
BoundaryScores aggregate_max_pool(std::size_t n,
                                  std::span<const WindowScores> fragments);

// Thresholds the scores and drops boundaries closer than
// min_segment_utterances to the previously kept boundary, scanning left to
// right so the earlier boundary wins.
SegmentList scores_to_segments(const BoundaryScores& scores,
                               const SegmentationConfig& cfg);

inline constexpr std::size_t kDefaultCohesionBlock = 6;

// Text-tiling depth scores from term-frequency cosine similarity between the
// `block_utterances` utterances either side of each gap. Throws
// kTranscriptTooShort for fewer than two utterances.
BoundaryScores lexical_cohesion_scores(
    const Transcript& t, std::size_t block_utterances = kDefaultCohesionBlock);

// Raw gap similarities, exposed for diagnostics and tests. Entry i is the
// similarity across the gap before utterance i; entry 0 is unused (1.0).
std::vector<double> gap_similarities(const Transcript& t,
                                     std::size_t block_utterances);

struct SegmentationMetrics {
  double pk = 0.0;
  double window_diff = 0.0;
  std::size_t k = 0;
};

// Standard Pk and WindowDiff. k defaults to half the mean gold segment
// length (at least 1). Throws kLengthMismatch when the lists cover different
// lengths.
SegmentationMetrics evaluate_segmentation(const SegmentList& predicted,
                                          const SegmentList& gold,
                                          std::optional<std::size_t> k = {});

// Source of per-window boundary scores.
class BoundaryScorer {
 public:
  virtual ~BoundaryScorer() = default;

  // Called once per transcript before any score_window call. score_window
  // may then run concurrently for different windows.
  virtual void prepare(const Transcript& t) { (void)t; }
  virtual std::vector<double> score_window(const Transcript& t,
                                           const UtteranceSpan& window) = 0;
  virtual std::size_t max_parallel() const { return 1; }
};

// Lexical cohesion over the whole transcript; each window receives its
// slice, so blocks may reach past window edges.
class LexicalCohesionScorer final : public BoundaryScorer {
 public:
  explicit LexicalCohesionScorer(std::size_t block_utterances = kDefaultCohesionBlock)
      : block_(block_utterances) {}

  void prepare(const Transcript& t) override;
  std::vector<double> score_window(const Transcript& t,
                                   const UtteranceSpan& window) override;

 private:
  std::size_t block_;
  BoundaryScores scores_;
};

// Asks a backend (Classify, boundary task) about every utterance in a window,
// with the preceding in-window utterances as context. The first position of
// a window has no context and scores 0; overlapping windows fill it in.
class RemoteBoundaryScorer final : public BoundaryScorer {
 public:
  explicit RemoteBoundaryScorer(Backend& backend,
                                std::size_t context_utterances = kDefaultCohesionBlock,
                                std::size_t token_budget = 512)
      : backend_(backend),
        context_utterances_(context_utterances),
        token_budget_(token_budget) {}

  std::vector<double> score_window(const Transcript& t,
                                   const UtteranceSpan& window) override;
  std::size_t max_parallel() const override;

 private:
  Backend& backend_;
  std::size_t context_utterances_;
  std::size_t token_budget_;
};

// Windows -> scorer -> max pool -> thresholding. A single-utterance
// transcript yields one segment without consulting the scorer.
SegmentList segment_transcript(const Transcript& t, BoundaryScorer& scorer,
                               const SegmentationConfig& cfg);

}  // namespace recap
