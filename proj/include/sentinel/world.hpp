#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/config.hpp"
#include "sentinel/core.hpp"
#include "sentinel/geometry.hpp"

namespace sentinel {

using ActorId = std::uint32_t;

/// Speed takes `speed` from time `t_s` on (piecewise constant).
struct SpeedKnot {
  double t_s = 0.0;
  double speed = 0.0;
};

struct ActorSpec {
  ActorId id = 0;
  ObjectClass kind = ObjectClass::Car;
  Pose2 initial{};
  double speed = 0.0;
  std::vector<SpeedKnot> speed_profile;
  std::vector<Vec2> waypoints;
  Footprint footprint{};
  bool agent = false;  // carries a surround-view rig and transmits frames
  std::optional<std::pair<double, double>> violation_window;

  double speed_at(double t_s) const;
};

struct RsuSpec {
  ActorId id = 0;
  Pose2 pose{};
  SensorConfig sensor{};
};

struct ScriptedQuery {
  double t_s = 0.0;
  std::string text;
};

struct Scenario {
  std::string id;
  double duration_s = 0.0;
  double dt_s = 0.1;
  std::uint64_t seed = 0;
  double map_extent_m = 100.0;
  std::optional<ActorId> ego_id;
  SensorConfig vehicle_sensor{};
  ChannelModel channel{};
  std::vector<ActorSpec> actors;
  std::vector<RsuSpec> rsus;
  std::vector<OrientedRect> static_occluders;
  std::vector<ScriptedQuery> queries;
  std::optional<std::int64_t> occlusion_tick;

  /// Number of steps; states exist for ticks 0..tick_count().
  std::int64_t tick_count() const;
  /// Explicit ego or the first agent actor. Throws ValidationError if none.
  ActorId ego() const;
  /// Agent actor ids followed by RSU ids.
  std::vector<ActorId> sensing_agent_ids() const;
  const ActorSpec* find_actor(ActorId id) const;

  /// Throws ValidationError on a violated invariant.
  void validate() const;
};

struct ActorState {
  ActorId id = 0;
  ObjectClass kind = ObjectClass::Car;
  Vec2 position{};
  double yaw = 0.0;
  double speed = 0.0;
  Footprint footprint{};
  double odometer_m = 0.0;
  bool violating = false;

  OrientedRect rect() const { return {position, yaw, footprint.length, footprint.width}; }
  Pose2 pose() const { return {position.x, position.y, yaw}; }
  bool operator==(const ActorState&) const = default;
};

/// Immutable snapshot of the world at one tick.
struct WorldState {
  std::int64_t tick = 0;
  double time_s = 0.0;
  std::vector<ActorState> actors;  // sorted by id

  const ActorState* find(ActorId id) const;
  bool operator==(const WorldState&) const = default;
};

struct CollisionEvent {
  std::int64_t tick = 0;
  ActorId actor_a = 0;
  ActorId actor_b = 0;
  double overlap_m = 0.0;
};

WorldState initial_state(const Scenario& scenario);

/// Advances every actor by one dt. Throws EndOfScenario at the duration boundary.
WorldState step_world(const WorldState& state, const Scenario& scenario);

/// One event per overlapping footprint pair, actor_a < actor_b.
std::vector<CollisionEvent> detect_collisions(const WorldState& state);

/// Short stable hash of every field of the state.
std::string world_digest(const WorldState& state);

// Scenario documents: {"schema_version":1, "scenario":{...}}.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::string& path);
std::string dump_scenario(const Scenario& scenario);

}  // namespace sentinel
