#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include "sentinel/reasoning.hpp"

namespace sentinel {

enum class Outcome : std::uint8_t { Success, Failure, Neutral };
std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);  // SchemaError

/// Stored unit of prior experience.
struct CorpusBox {
  std::string box_id;
  Mission mission = Mission::TrafficSituation;
  std::string summary_text;
  std::vector<std::string> tags;
  std::int64_t created_tick = 0;
  Outcome outcome = Outcome::Neutral;
  std::string payload_ref;

  bool operator==(const CorpusBox&) const = default;
};

/// One NDJSON record: {box_id, mission, summary_text, tags, created_tick,
/// outcome, payload_ref}. Keys are written in that order.
std::string box_to_json_line(const CorpusBox& box);
CorpusBox box_from_json_line(std::string_view line);  // SchemaError

/// Append-only box log with an in-memory index. Readers share, the writer is
/// exclusive. With a path, every append is written and flushed before it
/// becomes visible, and an existing log is replayed on open.
class CorpusStore {
 public:
  CorpusStore() = default;
  explicit CorpusStore(std::filesystem::path log_path);

  /// Throws ValidationError on a duplicate id or empty summary, IoError when
  /// the log cannot be written.
  void append(const CorpusBox& box);

  std::vector<CorpusBox> snapshot() const;
  std::size_t size() const;
  bool contains(const std::string& box_id) const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  mutable std::shared_mutex mu_;
  std::vector<CorpusBox> boxes_;
  std::unordered_set<std::string> ids_;
  std::optional<std::filesystem::path> path_;
};

struct SamplingConfig {
  double w_relevance = 0.5;
  double w_recency = 0.3;
  double w_outcome = 0.2;
  double half_life_ticks = 500.0;
};

double outcome_weight(Outcome o);  // success 1.0, failure 0.8, neutral 0.5

/// |a ∩ b| / |a ∪ b| over tag sets; 0 when both are empty.
double tag_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// 0.5^(age / half_life) with negative ages treated as zero.
double recency_weight(std::int64_t created_tick, std::int64_t now_tick, double half_life_ticks);

double box_priority(const CorpusBox& box, const std::vector<std::string>& job_tags, std::int64_t now_tick,
                    const SamplingConfig& cfg = {});

struct ScoredBox {
  CorpusBox box;
  double priority = 0.0;
};

/// Ranking used by sampling: higher priority, then newer, then smaller id.
bool ranks_before(const ScoredBox& a, const ScoredBox& b);

/// Top-k boxes for the job, scored on the job's corpus clock.
std::vector<ScoredBox> sample_corpus(const CorpusStore& store, const QueryJob& job, std::size_t k,
                                     const SamplingConfig& cfg = {});

}  // namespace sentinel
