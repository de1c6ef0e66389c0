#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sentinel/pipeline.hpp"

namespace sentinel {

using nlohmann::json;

inline constexpr std::string_view kLogFormat = "sentinel-episode-log";
inline constexpr int kLogVersion = 1;

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ParseError on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Run parameters echoed into the log header. Output paths are left out so
/// the same run written to two directories gives identical bytes.
struct LogHeader {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::string episode_id;
  double threshold = 0.3;
  double renewal_rate = 0.5;
  PromptLevel level = PromptLevel::Middle;
  std::string llm = "mock";
};

json header_json(const LogHeader& h);

// Building blocks shared by the log, the live API and replay.
json grid_json(const BevGrid& grid);  // wire-quantised cells, base64
BevGrid grid_from_json(const json& j);
json detection_json(const Detection3D& d);
Detection3D detection_from_json(const json& j);
json actor_json(const ActorState& a);
ActorState actor_from_json(const json& j);
json track_json(const Track& t);
json collision_prediction_json(const CollisionPrediction& c);
json product_json(const PerceptionProduct& p, bool complete, double fired_at_s, bool with_grid = true);
json risk_json(const RiskScore& r);
json alert_json(const SafetyAlert& a);
json decision_frame_json(const DecisionFrame& f);

/// One per-tick record: world digest and truth, the fused product (or null),
/// risk, decision frames, alerts and world collisions.
json tick_record(const TraceTick& tick, const TickReasoning& reasoning);

json summary_json(const PerceptionTrace& trace, const EpisodeReasoning& reasoning, int exit_code);

/// Newline-delimited JSON: header, one record per tick, summary, then a
/// checksum line holding FNV-1a 64 over every preceding byte.
std::string render_episode_log(const LogHeader& header, const PerceptionTrace& trace,
                               const EpisodeReasoning& reasoning, int exit_code);

struct EpisodeLog {
  json header;
  std::vector<json> ticks;
  json summary;
};

/// Throws IoError when the file cannot be read (the path is in the message)
/// and SchemaError on a malformed log or checksum mismatch.
EpisodeLog parse_episode_log(std::string_view text);
EpisodeLog read_episode_log(const std::filesystem::path& path);

/// Server-push event derived from a tick record.
struct StreamEvent {
  std::string name;  // "frame" or "alert"
  std::int64_t tick = 0;
  json data;

  /// text/event-stream encoding: "id:", "event:" and "data:" lines.
  std::string sse() const;
};

/// The frame event (when the tick has a product) followed by its alerts.
/// Questions of active alerts are taken from the record's decision frames.
std::vector<StreamEvent> stream_events(const json& record);

}  // namespace sentinel
