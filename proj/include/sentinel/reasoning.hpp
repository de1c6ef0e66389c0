#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sentinel/fusion.hpp"

namespace sentinel {

enum class Mission : std::uint8_t {
  SafetyEvaluation,
  DrivingCondition,
  TrafficCondition,
  TrafficViolation,
  AccidentPrediction,
  AccidentResponsibility,
  CausationAnalysis,
  TrafficSituation,
};

inline constexpr std::array<Mission, 8> kAllMissions = {
    Mission::SafetyEvaluation,   Mission::DrivingCondition,       Mission::TrafficCondition,
    Mission::TrafficViolation,   Mission::AccidentPrediction,     Mission::AccidentResponsibility,
    Mission::CausationAnalysis,  Mission::TrafficSituation,
};

std::string_view to_string(Mission m);
/// Throws SchemaError for unknown names.
Mission mission_from_string(std::string_view s);

enum class QueryMode : std::uint8_t { Active, Passive };
std::string_view to_string(QueryMode m);

enum class Severity : std::uint8_t { Info, Caution, Warning, Critical };
std::string_view to_string(Severity s);
/// Throws ParseError for unknown names.
Severity severity_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Risk intensity
// ---------------------------------------------------------------------------
struct RiskConfig {
  double ttc_scale_s = 5.0;
  double proximity_scale_m = 10.0;
  double w_ttc = 0.5;
  double w_proximity = 0.3;
  double w_violation = 0.2;
  double ego_exclusion_m = 1.5;  // detections this close to the ego pose are the ego itself
};

struct RiskScore {
  double value = 0.0;
  double ttc_term = 0.0;
  double proximity_term = 0.0;
  double violation_term = 0.0;
  // Context kept for evidence and templates.
  std::optional<double> min_ttc_s;
  std::optional<std::pair<std::uint32_t, std::uint32_t>> ttc_pair;
  std::optional<std::uint32_t> nearest_track;
  double nearest_distance_m = std::numeric_limits<double>::infinity();
};

RiskScore compute_risk_intensity(const PerceptionProduct& p, const Pose2& ego_pose, const RiskConfig& cfg = {});

// ---------------------------------------------------------------------------
// Input bundling and query jobs
// ---------------------------------------------------------------------------
struct DialogueTurn {
  std::string speaker;  // "driver" or "assistant"
  std::string text;
  bool operator==(const DialogueTurn&) const = default;
};

struct TrackBrief {
  std::uint32_t id = 0;
  ObjectClass cls = ObjectClass::Car;
  Vec2 position{};
  double speed = 0.0;
  double distance_m = 0.0;  // to the ego
};

/// Structured scene summary that replaces image input to the language model.
struct SceneBrief {
  std::vector<TrackBrief> tracks;  // nearest first
  std::vector<CollisionPrediction> collisions;  // earliest first
  std::vector<std::uint32_t> violations;
};

inline constexpr std::size_t kDialogueTail = 10;

struct InputBundle {
  std::string episode_id;
  std::int64_t tick = 0;
  double time_s = 0.0;
  std::string digest;
  Pose2 ego_pose{};
  RiskScore risk{};
  SceneBrief scene;
  std::vector<DialogueTurn> dialogue_tail;
  std::vector<std::string> label_refs;
};

/// Throws MissingPerception when `p` is null.
InputBundle build_input_bundle(const std::string& episode_id, const PerceptionProduct* p, double time_s,
                               const Pose2& ego_pose, std::span<const DialogueTurn> dialogue,
                               std::vector<std::string> label_refs, const RiskConfig& risk_cfg = {});

std::string bundle_digest(const std::string& episode_id, std::int64_t tick);

struct QueryJob {
  QueryMode mode = QueryMode::Passive;
  Mission mission = Mission::TrafficSituation;
  std::string text;
  std::vector<std::string> tags;  // sorted, unique
  std::int64_t tick = 0;
  std::int64_t corpus_tick = 0;  // tick on the corpus clock (global across episodes)
  double time_s = 0.0;
  RiskScore risk{};
  SceneBrief scene;
  std::string bundle_digest;
};

/// Relevance tags of a job: mission, mode, hazards present, object classes
/// present and the risk band.
std::vector<std::string> job_tags(Mission mission, QueryMode mode, const RiskScore& risk, const SceneBrief& scene);

struct AlertConfig {
  double threshold = 0.3;
  double cooldown_s = 3.0;
  void validate() const;  // ConfigError outside [0,1] or negative cooldown
};

/// Stateful passive trigger: fires when risk >= threshold and no passive job
/// fired within the cooldown.
class PassiveTrigger {
 public:
  explicit PassiveTrigger(AlertConfig cfg = {});

  std::optional<QueryJob> poll(const InputBundle& bundle);
  void set_threshold(double value);
  const AlertConfig& config() const { return cfg_; }

 private:
  AlertConfig cfg_;
  std::optional<double> last_fire_s_;
};

/// Component with the largest weighted contribution; ties go to ttc, then
/// proximity, then violation.
Mission dominant_mission(const RiskScore& risk, const RiskConfig& cfg = {});

/// Keyword table mapping driver utterances to missions.
class MissionRubric {
 public:
  struct Entry {
    Mission mission;
    std::vector<std::string> keywords;  // lower case; may hold several words
  };

  /// Built-in table (same content as data/mission_rubric.json).
  static MissionRubric builtin();
  /// Throws SchemaError.
  static MissionRubric from_json(std::string_view text);
  static MissionRubric from_file(const std::string& path);

  /// Most keyword hits wins; ties follow table order; no hit gives
  /// TrafficSituation.
  Mission classify(std::string_view text) const;

  int version() const { return version_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  int version_ = 1;
  std::vector<Entry> entries_;
};

/// Lowercase alphanumeric words.
std::vector<std::string> tokenize(std::string_view text);

/// Throws EmptyQuery on blank text.
QueryJob submit_active_query(const InputBundle& bundle, std::string_view text, const MissionRubric& rubric);

}  // namespace sentinel
