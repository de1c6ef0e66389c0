#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/fusion.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/session.hpp"
#include "sentinel/v2x.hpp"
#include "sentinel/world.hpp"

namespace sentinel {

struct PerceptionOptions {
  HeadsConfig heads{};
  GridSpec local_grid{};
  double staleness_s = 0.3;
  bool keep_grids = true;    // fused grids stay in the trace
  bool keep_frames = false;  // per-agent detections stay in the trace (grids dropped)
  bool stop_on_collision = true;
  double violation_gate_m = 2.0;
};

/// A fused product as it left the fusion centre.
struct FiredProduct {
  PerceptionProduct product;
  bool complete = false;
  double fired_at_s = 0.0;
};

struct SimStep {
  WorldState world;
  Pose2 ego_pose{};
  std::vector<CollisionEvent> collisions;
  std::vector<SensorFrame> frames;  // sent this tick (only with keep_frames; grids dropped)
  std::vector<FiredProduct> fired;  // products that fired during this tick, in tick order
};

/// Runs world, sensing, channel, ingestion and fusion one tick at a time.
/// Products are stamped with the tick they describe, which can be earlier
/// than the step that releases them.
class PerceptionSimulator {
 public:
  explicit PerceptionSimulator(Scenario scenario, PerceptionOptions opts = {});

  /// Next tick, or nullopt once the scenario (or the first collision, with
  /// stop_on_collision) is over and every in-flight message is drained.
  std::optional<SimStep> step();
  bool done() const { return done_; }

  const Scenario& scenario() const { return scenario_; }
  const Channel& channel() const { return channel_; }
  const IngestBuffer& ingest() const { return ingest_; }

 private:
  void deliver_until(double t, std::vector<ReadySet>& ready);
  std::vector<FiredProduct> fuse(std::vector<ReadySet> ready);

  Scenario scenario_;
  PerceptionOptions opts_;
  std::vector<SensorAgent> rsus_;
  ActorId ego_id_;
  std::optional<WorldState> world_;
  bool done_ = false;
  Channel channel_;
  IngestBuffer ingest_;
  FusionCenter fusion_;
  std::vector<InFlight> in_flight_;  // kept sorted by delivery time, then send order
  std::uint64_t send_seq_ = 0;
  std::map<std::int64_t, WorldState> recent_;  // world states still awaiting fusion
};

struct TraceTick {
  std::int64_t tick = 0;
  double time_s = 0.0;
  WorldState world;
  Pose2 ego_pose{};
  std::vector<CollisionEvent> collisions;
  std::vector<SensorFrame> frames;
  std::optional<PerceptionProduct> product;
  bool complete = false;
  double fired_at_s = 0.0;
};

struct PerceptionTrace {
  std::string scenario_id;
  std::uint64_t seed = 0;
  double dt_s = 0.1;
  std::vector<TraceTick> ticks;  // contiguous from tick 0
  std::optional<std::int64_t> first_collision_tick;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t discarded_stale = 0;
  std::uint64_t discarded_late = 0;
};

PerceptionTrace simulate_perception(const Scenario& scenario, const PerceptionOptions& opts = {});

/// What the reasoning loop produced for one tick.
struct TickReasoning {
  std::optional<RiskScore> risk;
  std::vector<DecisionFrame> frames;
  std::vector<std::string> errors;
};

struct EpisodeSpec {
  std::string episode_id;
  std::int64_t corpus_tick_offset = 0;
  double renewal_rate = 0.5;
  std::size_t finalize_k = 2;
  ReasoningConfig reasoning{};
};

struct EpisodeReasoning {
  std::vector<TickReasoning> ticks;  // parallel to trace.ticks
  std::vector<DecisionFrame> frames;
  std::vector<SafetyAlert> alerts;
  std::vector<DialogueTurn> dialogue;
  std::vector<CorpusBox> committed;
};

/// Runs the reasoning loop over a perception trace in tick order, submitting
/// the scenario's scripted queries when their time comes, then applies the
/// corpus update.
EpisodeReasoning run_reasoning(const Scenario& scenario, const PerceptionTrace& trace, const EpisodeSpec& spec,
                               LlmClient& llm, CorpusStore& store, const MissionRubric& rubric);

/// Index of what perception held per tick, for the alert rater.
EvidenceIndex evidence_index(const PerceptionTrace& trace);

struct RunConfig {
  std::string scenario_path;
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
  double threshold = 0.3;
  std::string llm = "mock";
  std::string out_dir = "out";
  double renewal_rate = 0.5;
  PromptLevel level = PromptLevel::Middle;
  std::optional<std::string> corpus_path;  // default <out>/corpus.ndjson
  std::optional<std::string> rubric_path;

  /// Throws ConfigError.
  void validate() const;
};

struct RunOutcome {
  int exit_code = 0;  // 0 clean, 2 collision
  std::filesystem::path log_path;
  std::optional<std::int64_t> collision_tick;
  std::size_t alerts = 0;
  std::vector<CorpusBox> committed;
};

/// Full pipeline for one scenario; writes <out>/episode.ndjson. Throws
/// ConfigError, IoError (and SchemaError/ValidationError for bad scenarios).
RunOutcome cmd_run(const RunConfig& cfg);

}  // namespace sentinel
