#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sentinel/bev.hpp"
#include "sentinel/config.hpp"
#include "sentinel/geometry.hpp"
#include "sentinel/world.hpp"

namespace sentinel {

struct Detection3D {
  ObjectClass cls = ObjectClass::Car;
  Vec2 center{};
  double yaw = 0.0;
  Footprint footprint{};
  double confidence = 0.0;
  // Annotations filled by the fusion heads; not carried on the wire.
  double speed = 0.0;
  std::uint32_t track_id = 0;
  bool peripheral = false;

  OrientedRect rect() const { return {center, yaw, footprint.length, footprint.width}; }
  bool operator==(const Detection3D&) const = default;
};

/// One sensing agent: a vehicle (pose from the world) or an RSU.
struct SensorAgent {
  ActorId id = 0;
  Pose2 pose{};
  SensorConfig config{};
};

struct SensorFrame {
  ActorId agent_id = 0;
  std::int64_t tick = 0;
  Pose2 ego_pose{};
  std::vector<Detection3D> detections;  // agent frame
  BevGrid local_grid;                   // agent frame, origin at the agent

  bool operator==(const SensorFrame&) const = default;
};

inline constexpr double kOccupiedProb = 0.9;
inline constexpr double kFreeProb = 0.3;
inline constexpr double kUnknownProb = 0.5;

/// Range and bearing gate of the camera rig, for a point in the agent frame.
bool in_field_of_view(Vec2 local_point, const SensorConfig& cfg);

/// Range, bearing and line-of-sight test from `origin` to the target centre.
bool visible(const Pose2& origin, const ActorState& target, std::span<const OrientedRect> occluders,
             const SensorConfig& cfg);

/// clamp(1 - range/max_range, 0.05, 1)
double detection_confidence(double range_m, const SensorConfig& cfg);

/// Noisy detections and local BEV of one agent. Deterministic in
/// (seed, world.tick, agent.id). `static_occluders` block sight but are not
/// detection targets.
SensorFrame sense_frame(const WorldState& world, const SensorAgent& agent, std::uint64_t seed,
                        std::span<const OrientedRect> static_occluders = {}, const GridSpec& grid = GridSpec{});

/// Three-valued occupancy raster in the agent frame: cells under a detection
/// footprint 0.9, observed free cells 0.3, unobserved cells 0.5. Detections
/// occlude the cells behind them.
BevGrid rasterize_local_bev(const SensorFrame& frame, const GridSpec& spec, const SensorConfig& cfg = SensorConfig{});

}  // namespace sentinel
