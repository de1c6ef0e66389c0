#include "sentinel/sensing.hpp"

#include <algorithm>

namespace sentinel {

void SensorConfig::validate() const {
  if (max_range_m < 0.0 || fov_deg < 0.0 || sigma_pos_base_m < 0.0 || sigma_pos_range_coeff < 0.0 ||
      sigma_yaw_rad < 0.0 || drop_prob < 0.0 || false_pos_rate_per_frame < 0.0 || camera_count < 0) {
    throw ValidationError("sensor parameters must be non-negative");
  }
  if (drop_prob > 1.0) throw ValidationError("sensor drop_prob must be <= 1");
  if (camera_count * fov_deg > 360.0 + 1e-9) throw ValidationError("camera coverage exceeds 360 degrees");
}

SensorConfig SensorConfig::noiseless() {
  SensorConfig c;
  c.sigma_pos_base_m = 0.0;
  c.sigma_pos_range_coeff = 0.0;
  c.sigma_yaw_rad = 0.0;
  c.drop_prob = 0.0;
  c.false_pos_rate_per_frame = 0.0;
  return c;
}

bool in_field_of_view(Vec2 p, const SensorConfig& cfg) {
  const double range = p.norm();
  if (range > cfg.max_range_m) return false;
  if (cfg.camera_count <= 0) return false;
  if (range < 1e-9) return true;
  if (cfg.camera_count * cfg.fov_deg >= 360.0 - 1e-9) return true;
  const double bearing = std::atan2(p.y, p.x);
  const double half = 0.5 * cfg.fov_deg * kPi / 180.0;
  const double step = 2.0 * kPi / cfg.camera_count;
  for (int i = 0; i < cfg.camera_count; ++i) {
    if (std::abs(wrap_angle(bearing - i * step)) <= half + 1e-12) return true;
  }
  return false;
}

bool visible(const Pose2& origin, const ActorState& target, std::span<const OrientedRect> occluders,
             const SensorConfig& cfg) {
  const Vec2 local = rotate(target.position - origin.position(), -origin.yaw);
  if (!in_field_of_view(local, cfg)) return false;
  for (const OrientedRect& occ : occluders) {
    if (segment_intersects_rect(origin.position(), target.position, occ)) return false;
  }
  return true;
}

double detection_confidence(double range_m, const SensorConfig& cfg) {
  const double raw = cfg.max_range_m > 0.0 ? 1.0 - range_m / cfg.max_range_m : 0.0;
  return std::clamp(raw, 0.05, 1.0);
}

SensorFrame sense_frame(const WorldState& world, const SensorAgent& agent, std::uint64_t seed,
                        std::span<const OrientedRect> static_occluders, const GridSpec& grid) {
  agent.config.validate();
  SensorFrame frame;
  frame.agent_id = agent.id;
  frame.tick = world.tick;
  frame.ego_pose = agent.pose;

  auto rng = keyed_rng({seed, static_cast<std::uint64_t>(world.tick), agent.id});
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const SensorConfig& cfg = agent.config;

  std::vector<OrientedRect> occluders;
  occluders.reserve(static_occluders.size() + world.actors.size());
  for (const ActorState& target : world.actors) {
    if (target.id == agent.id) continue;
    occluders.assign(static_occluders.begin(), static_occluders.end());
    for (const ActorState& other : world.actors) {
      if (other.id != agent.id && other.id != target.id) occluders.push_back(other.rect());
    }
    if (!visible(agent.pose, target, occluders, cfg)) continue;

    // Fixed draw order keeps the stream aligned whatever the outcome.
    const double u_drop = uniform(rng);
    const double nx = gauss(rng);
    const double ny = gauss(rng);
    const double nyaw = gauss(rng);
    if (u_drop < cfg.drop_prob) continue;

    const Vec2 local = rotate(target.position - agent.pose.position(), -agent.pose.yaw);
    const double range = local.norm();
    const double sigma = cfg.sigma_pos_base_m * (1.0 + range * cfg.sigma_pos_range_coeff);
    Detection3D det;
    det.cls = target.kind;
    det.center = {local.x + sigma * nx, local.y + sigma * ny};
    det.yaw = wrap_angle(target.yaw - agent.pose.yaw + cfg.sigma_yaw_rad * nyaw);
    det.footprint = target.footprint;
    det.confidence = detection_confidence(range, cfg);
    frame.detections.push_back(det);
  }

  if (cfg.false_pos_rate_per_frame > 0.0 && cfg.camera_count > 0 && cfg.max_range_m > 0.0) {
    std::poisson_distribution<int> clutter(cfg.false_pos_rate_per_frame);
    const int n = clutter(rng);
    const double step = 2.0 * kPi / cfg.camera_count;
    const double half = 0.5 * cfg.fov_deg * kPi / 180.0;
    std::uniform_int_distribution<int> camera(0, cfg.camera_count - 1);
    for (int i = 0; i < n; ++i) {
      const double bearing = camera(rng) * step + (2.0 * uniform(rng) - 1.0) * half;
      const double range = cfg.max_range_m * std::sqrt(uniform(rng));
      Detection3D det;
      det.cls = ObjectClass::Car;
      det.center = {range * std::cos(bearing), range * std::sin(bearing)};
      det.yaw = wrap_angle((2.0 * uniform(rng) - 1.0) * kPi);
      det.footprint = default_footprint(ObjectClass::Car);
      det.confidence = 0.5 * detection_confidence(range, cfg);
      frame.detections.push_back(det);
    }
  }

  frame.local_grid = rasterize_local_bev(frame, grid, cfg);
  return frame;
}

BevGrid rasterize_local_bev(const SensorFrame& frame, const GridSpec& spec, const SensorConfig& cfg) {
  spec.validate();
  BevGrid grid(spec, kUnknownProb);
  struct Blocker {
    OrientedRect rect;
    double near_range;  // lower bound on the range of any point of the rect
    double reach_sq;    // squared bounding-circle radius, for cheap rejection
  };
  std::vector<Blocker> blockers;
  blockers.reserve(frame.detections.size());
  for (const Detection3D& d : frame.detections) {
    const double reach = 0.5 * d.footprint.diagonal();
    blockers.push_back({d.rect(), d.center.norm() - reach, reach * reach});
  }
  // Squared distance from p to the segment origin..c.
  auto seg_dist_sq = [](Vec2 c, Vec2 p) {
    const double len_sq = c.dot(c);
    const double t = len_sq > 0.0 ? std::clamp(p.dot(c) / len_sq, 0.0, 1.0) : 0.0;
    const Vec2 q = p - c * t;
    return q.dot(q);
  };
  const Vec2 sensor{0.0, 0.0};
  for (int row = 0; row < spec.cells_y; ++row) {
    for (int col = 0; col < spec.cells_x; ++col) {
      const Vec2 c = cell_center({col, row}, spec);
      bool occupied = false;
      for (const Blocker& b : blockers) {
        const Vec2 off = c - b.rect.center;
        if (off.dot(off) <= b.reach_sq && b.rect.contains(c)) {
          occupied = true;
          break;
        }
      }
      if (occupied) {
        grid.at(col, row) = kOccupiedProb;
        continue;
      }
      if (!in_field_of_view(c, cfg)) continue;
      const double range = c.norm();
      bool shadowed = false;
      for (const Blocker& b : blockers) {
        if (b.near_range < range && seg_dist_sq(c, b.rect.center) <= b.reach_sq &&
            segment_intersects_rect(sensor, c, b.rect)) {
          shadowed = true;
          break;
        }
      }
      if (!shadowed) grid.at(col, row) = kFreeProb;
    }
  }
  return grid;
}

}  // namespace sentinel
