#include "recap/pipeline.hpp"

#include <memory>

#include <fmt/format.h>

#include "recap/backend.hpp"
#include "json_types.hpp"
#include "recap/error.hpp"
#include "recap/log.hpp"

namespace recap {
namespace {

using nlohmann::json;

template <typename T>
void read_into(const json& j, const char* key, T& out, std::string_view section) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!detail::json_holds<T>(*it)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("pipeline config {}.{} has the wrong type", section, key));
  }
  out = it->get<T>();
}

const json& section(const json& j, const char* key) {
  static const json kEmpty = json::object();
  auto it = j.find(key);
  if (it == j.end()) return kEmpty;
  if (!it->is_object()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("pipeline config {} must be an object", key));
  }
  return *it;
}

}  // namespace

std::string_view to_string(ScorerKind k) {
  return k == ScorerKind::kLexical ? "lexical" : "remote";
}

ScorerKind scorer_kind_from_string(std::string_view s) {
  if (s == "lexical") return ScorerKind::kLexical;
  if (s == "remote") return ScorerKind::kRemote;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown scorer '{}'", s));
}

void PipelineConfig::validate() const {
  segmentation.validate();
  highlights.validate();
  chapters.validate();
  if (cohesion_block == 0) {
    throw Error(ErrorCode::kInvalidArgument, "cohesion_block must be positive");
  }
}

json to_json(const PipelineConfig& cfg) {
  const auto& s = cfg.segmentation;
  const auto& h = cfg.highlights;
  const auto& c = cfg.chapters;
  return {{"segmentation",
           {{"window_utterances", s.window_utterances},
            {"stride_utterances", s.stride_utterances},
            {"boundary_threshold", s.boundary_threshold},
            {"min_segment_utterances", s.min_segment_utterances}}},
          {"highlights",
           {{"extract_context_tokens", h.extract_context_tokens},
            {"abstract_context_tokens", h.abstract_context_tokens},
            {"max_notes", h.max_notes},
            {"score_threshold", h.score_threshold},
            {"display_context_utterances", h.display_context_utterances}}},
          {"chapters",
           {{"chunk_size", c.chunk_size}, {"context_tokens", c.context_tokens}}},
          {"scorer", std::string(to_string(cfg.scorer))},
          {"cohesion_block", cfg.cohesion_block}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "pipeline config must be an object");
  PipelineConfig cfg;
  const auto& s = section(j, "segmentation");
  read_into(s, "window_utterances", cfg.segmentation.window_utterances, "segmentation");
  read_into(s, "stride_utterances", cfg.segmentation.stride_utterances, "segmentation");
  read_into(s, "boundary_threshold", cfg.segmentation.boundary_threshold, "segmentation");
  read_into(s, "min_segment_utterances", cfg.segmentation.min_segment_utterances,
            "segmentation");
  const auto& h = section(j, "highlights");
  read_into(h, "extract_context_tokens", cfg.highlights.extract_context_tokens, "highlights");
  read_into(h, "abstract_context_tokens", cfg.highlights.abstract_context_tokens,
            "highlights");
  read_into(h, "max_notes", cfg.highlights.max_notes, "highlights");
  read_into(h, "score_threshold", cfg.highlights.score_threshold, "highlights");
  read_into(h, "display_context_utterances", cfg.highlights.display_context_utterances,
            "highlights");
  const auto& c = section(j, "chapters");
  read_into(c, "chunk_size", cfg.chapters.chunk_size, "chapters");
  read_into(c, "context_tokens", cfg.chapters.context_tokens, "chapters");
  std::string scorer(to_string(cfg.scorer));
  read_into(j, "scorer", scorer, "pipeline");
  cfg.scorer = scorer_kind_from_string(scorer);
  read_into(j, "cohesion_block", cfg.cohesion_block, "pipeline");
  cfg.validate();
  return cfg;
}

RecapDocument run_pipeline(const Transcript& t, Backend& backend,
                           const PipelineConfig& cfg, std::int64_t created_at_ms) {
  cfg.validate();
  if (t.empty()) throw Error(ErrorCode::kEmptyTranscript, "transcript has no utterances");
  auto highlights = run_highlights(t, backend, cfg.highlights);
  logger().debug("{}: {} key points, {} action items", t.meeting_id(),
                 highlights.key_points.size(), highlights.action_items.size());

  std::unique_ptr<BoundaryScorer> scorer;
  if (cfg.scorer == ScorerKind::kLexical) {
    scorer = std::make_unique<LexicalCohesionScorer>(cfg.cohesion_block);
  } else {
    scorer = std::make_unique<RemoteBoundaryScorer>(backend, cfg.cohesion_block,
                                                    cfg.chapters.context_tokens);
  }
  const auto segments = segment_transcript(t, *scorer, cfg.segmentation);
  logger().debug("{}: {} segments", t.meeting_id(), segments.size());

  std::vector<Note> notes;
  for (const auto* n : highlights.all()) notes.push_back(*n);
  auto chapters = build_chapters(t, segments, notes, backend, cfg.chapters);
  return assemble(t, std::move(highlights), std::move(chapters), to_json(cfg), created_at_ms);
}

}  // namespace recap
