#include "sentinel/world.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace sentinel {

double ActorSpec::speed_at(double t_s) const {
  double v = speed;
  for (const SpeedKnot& k : speed_profile) {
    if (t_s + 1e-9 >= k.t_s) v = k.speed;
  }
  return v;
}

std::int64_t Scenario::tick_count() const {
  return static_cast<std::int64_t>(std::floor(duration_s / dt_s + 1e-9));
}

ActorId Scenario::ego() const {
  if (ego_id) return *ego_id;
  for (const ActorSpec& a : actors) {
    if (a.agent) return a.id;
  }
  throw ValidationError("scenario '" + id + "' has no agent vehicle to act as ego");
}

std::vector<ActorId> Scenario::sensing_agent_ids() const {
  std::vector<ActorId> ids;
  for (const ActorSpec& a : actors) {
    if (a.agent) ids.push_back(a.id);
  }
  for (const RsuSpec& r : rsus) ids.push_back(r.id);
  return ids;
}

const ActorSpec* Scenario::find_actor(ActorId aid) const {
  for (const ActorSpec& a : actors) {
    if (a.id == aid) return &a;
  }
  return nullptr;
}

void Scenario::validate() const {
  if (!(dt_s > 0.0)) throw ValidationError("dt_s must be > 0");
  if (!(duration_s >= dt_s)) throw ValidationError("duration_s must be >= dt_s");
  if (!(map_extent_m > 0.0)) throw ValidationError("map_extent_m must be > 0");
  std::set<ActorId> ids;
  for (const ActorSpec& a : actors) {
    if (!ids.insert(a.id).second) throw ValidationError("duplicate actor id " + std::to_string(a.id));
    if (!(a.footprint.length > 0.0) || !(a.footprint.width > 0.0)) {
      throw ValidationError("actor " + std::to_string(a.id) + " has a non-positive footprint");
    }
    if (a.speed < 0.0) throw ValidationError("actor " + std::to_string(a.id) + " has negative speed");
    for (const SpeedKnot& k : a.speed_profile) {
      if (k.speed < 0.0) throw ValidationError("negative speed in profile of actor " + std::to_string(a.id));
    }
    if (!std::isfinite(a.initial.x) || !std::isfinite(a.initial.y) || !std::isfinite(a.initial.yaw)) {
      throw ValidationError("actor " + std::to_string(a.id) + " has a non-finite pose");
    }
  }
  for (const RsuSpec& r : rsus) {
    if (!ids.insert(r.id).second) throw ValidationError("duplicate agent id " + std::to_string(r.id));
    r.sensor.validate();
  }
  for (const OrientedRect& o : static_occluders) {
    if (!(o.length > 0.0) || !(o.width > 0.0)) throw ValidationError("static occluder footprint must be positive");
  }
  vehicle_sensor.validate();
  channel.validate();
  if (ego_id) {
    const ActorSpec* e = find_actor(*ego_id);
    if (e == nullptr || !e->agent) throw ValidationError("ego must reference an agent actor");
  }
}

const ActorState* WorldState::find(ActorId aid) const {
  auto it = std::lower_bound(actors.begin(), actors.end(), aid,
                             [](const ActorState& a, ActorId v) { return a.id < v; });
  if (it == actors.end() || it->id != aid) return nullptr;
  return &*it;
}

namespace {

struct PathSample {
  Vec2 position;
  double yaw;
  bool exhausted;
};

// Position after travelling `s` metres along start -> waypoints. Without
// waypoints the path is the ray along the initial heading.
PathSample sample_path(const ActorSpec& spec, double s) {
  const Vec2 start = spec.initial.position();
  if (spec.waypoints.empty()) {
    return {start + Vec2{std::cos(spec.initial.yaw), std::sin(spec.initial.yaw)} * s, spec.initial.yaw, false};
  }
  Vec2 from = start;
  double yaw = spec.initial.yaw;
  double remaining = s;
  for (const Vec2& to : spec.waypoints) {
    const Vec2 seg = to - from;
    const double len = seg.norm();
    if (len <= 1e-12) {
      from = to;
      continue;
    }
    yaw = std::atan2(seg.y, seg.x);
    if (remaining <= len) {
      return {from + seg * (remaining / len), yaw, false};
    }
    remaining -= len;
    from = to;
  }
  return {from, yaw, true};
}

bool violating_at(const ActorSpec& spec, double t) {
  return spec.violation_window && t + 1e-9 >= spec.violation_window->first &&
         t <= spec.violation_window->second + 1e-9;
}

ActorState make_state(const ActorSpec& spec, double odometer, double t) {
  const PathSample ps = sample_path(spec, odometer);
  ActorState st;
  st.id = spec.id;
  st.kind = spec.kind;
  st.position = ps.position;
  st.yaw = wrap_angle(ps.yaw);
  st.speed = ps.exhausted ? 0.0 : spec.speed_at(t);
  st.footprint = spec.footprint;
  st.odometer_m = odometer;
  st.violating = violating_at(spec, t);
  return st;
}

}  // namespace

WorldState initial_state(const Scenario& scenario) {
  WorldState ws;
  ws.tick = 0;
  ws.time_s = 0.0;
  for (const ActorSpec& spec : scenario.actors) ws.actors.push_back(make_state(spec, 0.0, 0.0));
  std::sort(ws.actors.begin(), ws.actors.end(), [](const ActorState& a, const ActorState& b) { return a.id < b.id; });
  return ws;
}

WorldState step_world(const WorldState& state, const Scenario& scenario) {
  if (state.tick >= scenario.tick_count()) {
    throw EndOfScenario("scenario '" + scenario.id + "' ended at tick " + std::to_string(state.tick));
  }
  WorldState next;
  next.tick = state.tick + 1;
  next.time_s = static_cast<double>(next.tick) * scenario.dt_s;
  next.actors.reserve(state.actors.size());
  for (const ActorState& cur : state.actors) {
    const ActorSpec* spec = scenario.find_actor(cur.id);
    if (spec == nullptr) throw ValidationError("world state references unknown actor " + std::to_string(cur.id));
    const double odo = cur.odometer_m + cur.speed * scenario.dt_s;
    next.actors.push_back(make_state(*spec, odo, next.time_s));
  }
  return next;
}

std::vector<CollisionEvent> detect_collisions(const WorldState& state) {
  std::vector<CollisionEvent> events;
  for (std::size_t i = 0; i < state.actors.size(); ++i) {
    for (std::size_t j = i + 1; j < state.actors.size(); ++j) {
      const ActorState& a = state.actors[i];
      const ActorState& b = state.actors[j];
      const double reach = 0.5 * (a.footprint.diagonal() + b.footprint.diagonal());
      if (distance(a.position, b.position) > reach) continue;
      if (auto depth = penetration_depth(a.rect(), b.rect())) {
        events.push_back({state.tick, std::min(a.id, b.id), std::max(a.id, b.id), *depth});
      }
    }
  }
  return events;
}

std::string world_digest(const WorldState& state) {
  std::string buf = std::to_string(state.tick);
  char tmp[160];
  for (const ActorState& a : state.actors) {
    std::snprintf(tmp, sizeof(tmp), "|%u:%u:%.17g:%.17g:%.17g:%.17g:%d", a.id, static_cast<unsigned>(a.kind),
                  a.position.x, a.position.y, a.yaw, a.speed, a.violating ? 1 : 0);
    buf += tmp;
  }
  return hex64(fnv1a64(buf));
}

}  // namespace sentinel
