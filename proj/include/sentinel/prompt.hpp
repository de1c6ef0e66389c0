#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sentinel/corpus.hpp"
#include "sentinel/reasoning.hpp"

namespace sentinel {

/// A stored raw frame retrieved for the prompt (the original-information backup).
struct RawRecord {
  std::int64_t tick = 0;
  std::string text;
};

/// A short-term entry of the current episode.
struct CacheEntry {
  std::int64_t tick = 0;
  std::string text;
};

inline constexpr std::size_t kDefaultPromptBudget = 16000;  // about 4000 tokens

struct PromptConfig {
  std::size_t budget_chars = kDefaultPromptBudget;
  bool chain_of_thought = true;
};

inline constexpr std::string_view kNoCorpusMarker = "[no corpus samples]";
inline constexpr std::string_view kNoRawMarker = "[no raw records]";
inline constexpr std::string_view kNoCacheMarker = "[no cache entries]";

/// Rendered prompt with its sections kept for inspection. Section order in
/// `rendered` is fixed: SYSTEM, RAW BACKUP, TEMPORAL CACHE, CORPUS SAMPLES, TASK.
struct PromptBundle {
  std::string system;
  std::vector<RawRecord> raw_backup;        // oldest first
  std::vector<CacheEntry> temporal_cache;   // oldest first
  std::vector<ScoredBox> sampled_boxes;     // highest priority first
  std::string task_instruction;
  std::string rendered;
  std::string digest;
  std::size_t dropped_boxes = 0;
  std::size_t dropped_raw = 0;
  std::size_t dropped_cache = 0;
  bool truncated = false;
};

/// One corpus line as it appears in the prompt.
std::string render_box_line(const ScoredBox& box, std::int64_t now_tick);

std::string render_task(const QueryJob& job, bool chain_of_thought);

/// Assembles the prompt under the character budget. Over budget it drops
/// sampled boxes lowest priority first, then raw records oldest first, then
/// cache entries oldest first, and finally truncates.
PromptBundle generate_prompt(const QueryJob& job, std::vector<ScoredBox> sampled, std::vector<CacheEntry> cache,
                             std::vector<RawRecord> raw, const PromptConfig& cfg = {});

}  // namespace sentinel
