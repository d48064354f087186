#include <gtest/gtest.h>

#include <atomic>

#include "generators.hpp"
#include "oracles.hpp"
#include "recap/backend.hpp"
#include "recap/error.hpp"
#include "recap/segmentation.hpp"
#include "recap/text.hpp"

namespace recap {
namespace {

using testing::Rng;

SegmentationConfig config(std::size_t window, std::size_t stride, double threshold,
                          std::size_t min_seg) {
  SegmentationConfig c;
  c.window_utterances = window;
  c.stride_utterances = stride;
  c.boundary_threshold = threshold;
  c.min_segment_utterances = min_seg;
  return c;
}

TEST(SegmentationConfig, Validates) {
  EXPECT_NO_THROW(SegmentationConfig{}.validate());
  EXPECT_THROW(config(10, 0, 0.5, 1).validate(), Error);
  EXPECT_THROW(config(10, 11, 0.5, 1).validate(), Error);
  EXPECT_THROW(config(10, 5, 1.5, 1).validate(), Error);
  EXPECT_THROW(config(10, 5, -0.1, 1).validate(), Error);
}

TEST(SegmentList, PartitionChecks) {
  auto s = SegmentList::from_boundaries({0, 40, 80}, 120);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.ranges()[1], (UtteranceSpan{40, 79}));
  EXPECT_EQ(s.boundaries(), (std::vector<std::size_t>{0, 40, 80}));
  EXPECT_EQ(s.labels()[79], 1u);
  EXPECT_THROW(SegmentList::from_boundaries({5}, 10), Error);
  EXPECT_THROW(SegmentList::from_boundaries({0, 5, 5}, 10), Error);
  EXPECT_THROW(SegmentList::from_boundaries({0, 10}, 10), Error);
  EXPECT_THROW(SegmentList({{0, 3}, {5, 9}}), Error);
}

TEST(SlidingWindows, DefaultsOn120) {
  const auto w = sliding_windows(120, SegmentationConfig{});
  ASSERT_EQ(w.size(), 10u);
  EXPECT_EQ(w.front(), (UtteranceSpan{0, 29}));
  EXPECT_EQ(w.back(), (UtteranceSpan{90, 119}));
}

TEST(SlidingWindows, MatchesOracleAndCoversEverything) {
  Rng rng(3);
  for (int round = 0; round < 500; ++round) {
    const auto cfg = testing::random_segmentation_config(rng);
    const auto n = testing::uniform(rng, 1, 300);
    const auto got = sliding_windows(n, cfg);
    const auto want = oracle::windows(n, cfg.window_utterances, cfg.stride_utterances);
    ASSERT_EQ(got.size(), want.size());
    std::vector<bool> covered(n, false);
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_EQ(got[i].first, want[i].first);
      ASSERT_EQ(got[i].last, want[i].second);
      ASSERT_LE(got[i].size(), cfg.window_utterances);
      for (auto p = got[i].first; p <= got[i].last; ++p) covered[p] = true;
    }
    ASSERT_EQ(got.back().last, n - 1);
    for (bool c : covered) ASSERT_TRUE(c);
  }
}

TEST(MaxPool, MatchesBruteForce) {
  Rng rng(5);
  for (int round = 0; round < 300; ++round) {
    const auto cfg = testing::random_segmentation_config(rng);
    const auto n = testing::uniform(rng, 1, 200);
    std::vector<WindowScores> frags;
    for (const auto& w : sliding_windows(n, cfg)) {
      WindowScores f{w, {}};
      for (std::size_t k = 0; k < w.size(); ++k) f.scores.push_back(testing::unit(rng));
      frags.push_back(std::move(f));
    }
    const auto got = aggregate_max_pool(n, frags);
    const auto want = oracle::max_pool(n, frags);
    ASSERT_EQ(got.values, want);
    // Adding a fragment never lowers any score.
    WindowScores extra{{0, n - 1}, std::vector<double>(n, 0.0)};
    frags.push_back(extra);
    const auto more = aggregate_max_pool(n, frags);
    for (std::size_t i = 0; i < n; ++i) ASSERT_GE(more[i], got[i]);
  }
}

TEST(MaxPool, Errors) {
  std::vector<WindowScores> frags{{{0, 2}, {0.1, 0.2, 0.3}}};
  EXPECT_EQ(aggregate_max_pool(3, frags).values, (std::vector<double>{1.0, 0.2, 0.3}));
  try {
    aggregate_max_pool(5, frags);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUncoveredPosition);
  }
  frags[0].scores.pop_back();
  EXPECT_THROW(aggregate_max_pool(3, frags), Error);
  std::vector<WindowScores> outside{{{2, 6}, std::vector<double>(5, 0.0)}};
  EXPECT_THROW(aggregate_max_pool(4, outside), Error);
}

TEST(ScoresToSegments, MinimumLengthKeepsEarlier) {
  BoundaryScores s{{1.0, 0, 0, 0.9, 0.95, 0, 0, 0, 0.6, 0}};
  auto seg = scores_to_segments(s, config(10, 5, 0.5, 3));
  EXPECT_EQ(seg.boundaries(), (std::vector<std::size_t>{0, 3, 8}));
  seg = scores_to_segments(s, config(10, 5, 0.5, 1));
  EXPECT_EQ(seg.boundaries(), (std::vector<std::size_t>{0, 3, 4, 8}));
  seg = scores_to_segments(s, config(10, 5, 0.95, 1));
  EXPECT_EQ(seg.boundaries(), (std::vector<std::size_t>{0, 4}));
  seg = scores_to_segments(s, config(10, 5, 0.0, 100));
  EXPECT_EQ(seg.boundaries(), (std::vector<std::size_t>{0}));
}

TEST(ScoresToSegments, Properties) {
  Rng rng(9);
  for (int round = 0; round < 300; ++round) {
    const auto cfg = testing::random_segmentation_config(rng);
    const auto n = testing::uniform(rng, 1, 200);
    BoundaryScores s;
    for (std::size_t i = 0; i < n; ++i) s.values.push_back(testing::unit(rng));
    s.values[0] = 1.0;
    const auto seg = scores_to_segments(s, cfg);
    ASSERT_EQ(seg.length(), n);
    const auto b = seg.boundaries();
    ASSERT_EQ(b.front(), 0u);
    for (std::size_t i = 1; i < b.size(); ++i) {
      ASSERT_GE(s[b[i]], cfg.boundary_threshold);
      ASSERT_GE(b[i] - b[i - 1], cfg.min_segment_utterances);
    }
  }
}

TEST(LexicalCohesion, FindsDisjointTopics) {
  Rng rng(21);
  const auto t = testing::disjoint_topic_transcript(rng, {40, 40, 40});
  const auto scores = lexical_cohesion_scores(t);
  ASSERT_EQ(scores.size(), 120u);
  EXPECT_DOUBLE_EQ(scores[0], 1.0);
  EXPECT_GT(scores[40], 0.9);
  EXPECT_GT(scores[80], 0.9);
  const auto sim = gap_similarities(t, 6);
  EXPECT_DOUBLE_EQ(sim[40], 0.0);
  EXPECT_DOUBLE_EQ(sim[80], 0.0);
  for (std::size_t i = 0; i < 120; ++i) {
    ASSERT_GE(scores[i], 0.0);
    ASSERT_LE(scores[i], 1.0);
  }
  LexicalCohesionScorer scorer;
  const auto seg = segment_transcript(t, scorer, SegmentationConfig{});
  EXPECT_EQ(seg.boundaries(), (std::vector<std::size_t>{0, 40, 80}));
}

TEST(LexicalCohesion, GapSimilarityMatchesCosineOracle) {
  Rng rng(4);
  const auto t = testing::chatter_transcript(rng, 30);
  const std::size_t block = 3;
  const auto sim = gap_similarities(t, block);
  for (std::size_t gap = 1; gap < t.size(); ++gap) {
    std::vector<std::string> left, right;
    for (auto i = gap >= block ? gap - block : 0; i < gap; ++i) {
      for (auto& w : text::content_terms(t[i].text)) left.push_back(w);
    }
    for (auto i = gap; i < std::min(t.size(), gap + block); ++i) {
      for (auto& w : text::content_terms(t[i].text)) right.push_back(w);
    }
    ASSERT_NEAR(sim[gap], oracle::cosine(left, right), 1e-12) << gap;
  }
}

TEST(LexicalCohesion, TooShort) {
  const auto t = testing::uniform_transcript(1, 4);
  try {
    lexical_cohesion_scores(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTranscriptTooShort);
  }
  LexicalCohesionScorer scorer;
  EXPECT_EQ(segment_transcript(t, scorer, SegmentationConfig{}).size(), 1u);
}

TEST(Metrics, KnownValues) {
  const auto gold = SegmentList::from_boundaries({0, 5}, 10);
  auto m = evaluate_segmentation(gold, gold);
  EXPECT_EQ(m.k, 3u);
  EXPECT_DOUBLE_EQ(m.pk, 0.0);
  EXPECT_DOUBLE_EQ(m.window_diff, 0.0);
  const auto none = SegmentList::from_boundaries({0}, 10);
  m = evaluate_segmentation(none, gold);
  // Probes (i, i+3) for i = 0..6; those straddling 5 are i = 2, 3, 4.
  EXPECT_DOUBLE_EQ(m.pk, 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(m.window_diff, 3.0 / 7.0);
  EXPECT_THROW(evaluate_segmentation(none, SegmentList::from_boundaries({0}, 11)), Error);
}

TEST(Metrics, MatchesProbeOracle) {
  Rng rng(17);
  for (int round = 0; round < 500; ++round) {
    const auto n = testing::uniform(rng, 2, 150);
    const auto gold = testing::random_segment_list(rng, n);
    const auto pred = testing::random_segment_list(rng, n);
    const auto k = testing::uniform(rng, 1, n);
    const auto m = evaluate_segmentation(pred, gold, k);
    ASSERT_DOUBLE_EQ(m.pk, oracle::pk(pred.labels(), gold.labels(), k));
    ASSERT_DOUBLE_EQ(m.window_diff, oracle::window_diff(pred.labels(), gold.labels(), k));
    ASSERT_LE(m.pk, m.window_diff);
  }
}

// Backend returning a boundary score chosen by the focus text.
class ScriptedBackend final : public Backend {
 public:
  BackendResponse invoke(const BackendRequest& req) override {
    req.validate();
    ++calls;
    BackendResponse r;
    r.scores.boundary = req.focus_text.starts_with("NEW") ? 0.97 : 0.05;
    max_context_tokens = std::max(max_context_tokens.load(),
                                  estimate_tokens(req.context_text));
    return r;
  }
  std::size_t max_parallel() const override { return 3; }

  std::atomic<int> calls{0};
  std::atomic<std::size_t> max_context_tokens{0};
};

TEST(RemoteScorer, UsesBackendBoundaries) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (int i = 0; i < 50; ++i) {
    lines.emplace_back("A", (i == 17 || i == 33 ? "NEW topic " : "more words ") +
                                std::to_string(i));
  }
  const auto t = testing::make_transcript(lines);
  ScriptedBackend backend;
  RemoteBoundaryScorer scorer(backend, 4, 20);
  const auto seg = segment_transcript(t, scorer, config(12, 6, 0.5, 3));
  EXPECT_EQ(seg.boundaries(), (std::vector<std::size_t>{0, 17, 33}));
  EXPECT_GT(backend.calls.load(), 49);
  EXPECT_LE(backend.max_context_tokens.load(), 20u);
}

TEST(RemoteScorer, WindowStartScoresZero) {
  const auto t = testing::uniform_transcript(6, 2);
  ScriptedBackend backend;
  RemoteBoundaryScorer scorer(backend);
  const auto s = scorer.score_window(t, {2, 5});
  ASSERT_EQ(s.size(), 4u);
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 0.05);
}

}  // namespace
}  // namespace recap
