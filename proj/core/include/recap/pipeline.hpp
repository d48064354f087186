#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string_view>

#include "recap/chapters.hpp"
#include "recap/highlights.hpp"
#include "recap/recapdoc.hpp"
#include "recap/segmentation.hpp"
#include "recap/transcript.hpp"

namespace recap {

class Backend;

enum class ScorerKind { kLexical, kRemote };

std::string_view to_string(ScorerKind k);
ScorerKind scorer_kind_from_string(std::string_view s);

struct PipelineConfig {
  SegmentationConfig segmentation;
  HighlightsConfig highlights;
  ChaptersConfig chapters;
  ScorerKind scorer = ScorerKind::kLexical;
  std::size_t cohesion_block = kDefaultCohesionBlock;

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json to_json(const PipelineConfig& cfg);
// Missing keys keep their defaults. Throws kInvalidArgument for wrong types
// or values that fail validation.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

// Highlights, segmentation and chapters over one transcript, assembled into
// a version-1 document carrying a snapshot of `cfg`.
RecapDocument run_pipeline(const Transcript& t, Backend& backend,
                           const PipelineConfig& cfg, std::int64_t created_at_ms);

}  // namespace recap
