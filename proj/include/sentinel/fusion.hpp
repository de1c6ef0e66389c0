#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "sentinel/bev.hpp"
#include "sentinel/sensing.hpp"

namespace sentinel {

/// Motion of an agent's frame between two ticks: `delta` is the pose of the
/// later frame expressed in the earlier one.
struct EgoMotion {
  ActorId agent_id = 0;
  std::int64_t from_tick = 0;
  std::int64_t to_tick = 0;
  Rigid2 delta{};
};

struct Track {
  std::uint32_t id = 0;
  ObjectClass cls = ObjectClass::Car;
  Vec2 position{};
  Vec2 velocity{};
  double yaw = 0.0;
  double yaw_rate = 0.0;
  Footprint footprint{};
  std::vector<std::pair<std::int64_t, Vec2>> history;  // strictly increasing ticks
  int age = 0;   // frames since last match
  int hits = 1;  // matched frames, including the spawning one

  double speed() const { return velocity.norm(); }
  /// Direction of travel, falling back to the body yaw when nearly static.
  double heading() const;
};

struct TrackerConfig {
  double gate_m = 2.0;
  int max_age = 5;
  double alpha = 0.6;
  double beta = 0.4;
  int min_hits = 3;  // hits before a track feeds the motion head
  std::size_t history_len = 30;
};

enum class MotionModel { CV, CTRV };

struct ForecastPoint {
  double t_s = 0.0;
  Vec2 position{};
};

struct TrajectoryForecast {
  std::uint32_t track_id = 0;
  ObjectClass cls = ObjectClass::Car;
  Vec2 origin{};  // position at t = 0
  MotionModel model = MotionModel::CV;
  std::vector<ForecastPoint> points;
};

struct CollisionPrediction {
  std::uint32_t track_a = 0;  // track_a < track_b
  std::uint32_t track_b = 0;
  double ttc_s = 0.0;
  Vec2 closest_point{};  // midpoint of the two centres at contact
};

using CollisionRadii = std::array<double, 4>;

/// Half the footprint diagonal of each class default.
CollisionRadii default_collision_radii();

struct PerceptionProduct {
  std::int64_t tick = 0;
  BevGrid fused_grid;
  std::vector<Detection3D> detections;  // global frame
  std::vector<Track> tracks;            // confirmed tracks
  std::vector<TrajectoryForecast> forecasts;
  std::vector<CollisionPrediction> collisions;
  std::vector<std::uint32_t> violations;  // track ids flagged as violating
  std::vector<ActorId> contributing_agents;
};

/// Rotates the centre by the pose yaw, translates, and adds the yaws.
Detection3D to_global_frame(const Detection3D& det, const Pose2& pose);

/// Re-expresses a grid captured at `grid_tick` in the frame of `motion.to_tick`.
BevGrid ego_align(const BevGrid& past, std::int64_t grid_tick, const EgoMotion& motion);

/// Per-cell log-odds sum of probabilities clamped to [0.01, 0.99].
BevGrid fuse_grids(std::span<const BevGrid> grids);

/// Single-linkage clustering of same-class detections within `gate_m`,
/// repeated until no two outputs link. Merged centre is the confidence
/// weighted mean, merged confidence the cluster maximum.
std::vector<Detection3D> associate_and_merge(std::span<const Detection3D> dets, double gate_m);

/// Greedy nearest-neighbour association against constant-velocity
/// predictions, alpha-beta update of matched tracks. `assigned` (optional)
/// receives the track id given to each detection.
std::vector<Track> update_tracks(std::vector<Track> tracks, std::span<const Detection3D> dets, double dt_s,
                                 std::int64_t tick, const TrackerConfig& cfg, std::uint32_t& next_id,
                                 std::vector<std::uint32_t>* assigned = nullptr);

std::vector<TrajectoryForecast> forecast_trajectories(std::span<const Track> tracks, double horizon_s, double dt_s,
                                                      MotionModel model);

/// Earliest time each pair of piecewise-linear forecasts comes within the sum
/// of their class radii; pairs that never do within the horizon are omitted.
std::vector<CollisionPrediction> predict_collisions(std::span<const TrajectoryForecast> forecasts,
                                                    const CollisionRadii& radii, double horizon_s);

struct HeadsConfig {
  GridSpec fused_grid{};  // origin is replaced by the ego position each tick
  double merge_gate_m = 2.0;
  TrackerConfig tracker{};
  double tick_dt_s = 0.1;
  double horizon_s = 5.0;
  double forecast_dt_s = 0.1;
  MotionModel model = MotionModel::CV;
  int temporal_window = 3;
  CollisionRadii radii = default_collision_radii();
};

/// Fusion centre: runs the detection, BEV and motion heads over the frames
/// gathered for one tick, keeping tracker state and a short grid history.
class FusionCenter {
 public:
  explicit FusionCenter(HeadsConfig cfg = {});

  /// Throws EmptyInput when no frame is supplied.
  PerceptionProduct run_heads(std::int64_t tick, std::span<const SensorFrame> frames, const Pose2& ego_pose);

  const std::vector<Track>& tracks() const { return tracks_; }
  const HeadsConfig& config() const { return cfg_; }

 private:
  struct Snapshot {
    std::int64_t tick;
    Vec2 origin;
    BevGrid grid;
  };

  HeadsConfig cfg_;
  std::vector<Track> tracks_;
  std::uint32_t next_track_id_ = 1;
  std::optional<std::int64_t> last_tick_;
  std::deque<Snapshot> history_;
};

/// Projects an agent-frame grid onto a world-aligned grid.
BevGrid project_to_common(const BevGrid& local, const Pose2& agent_pose, const GridSpec& common);

}  // namespace sentinel
