#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "sentinel/world.hpp"

namespace sentinel {

using detail::json;

namespace {

constexpr double kDeg = kPi / 180.0;

SensorConfig parse_sensor(const json& j, SensorConfig base, std::string_view where) {
  detail::require_object(j, where);
  detail::reject_unknown(j,
                         {"max_range_m", "camera_count", "fov_deg", "sigma_pos_base_m", "sigma_pos_range_coeff",
                          "sigma_yaw_rad", "drop_prob", "false_pos_rate_per_frame"},
                         where);
  base.max_range_m = detail::get_number_or(j, "max_range_m", base.max_range_m, where);
  if (j.contains("camera_count")) base.camera_count = static_cast<int>(detail::get_uint(j, "camera_count", where));
  base.fov_deg = detail::get_number_or(j, "fov_deg", base.fov_deg, where);
  base.sigma_pos_base_m = detail::get_number_or(j, "sigma_pos_base_m", base.sigma_pos_base_m, where);
  base.sigma_pos_range_coeff = detail::get_number_or(j, "sigma_pos_range_coeff", base.sigma_pos_range_coeff, where);
  base.sigma_yaw_rad = detail::get_number_or(j, "sigma_yaw_rad", base.sigma_yaw_rad, where);
  base.drop_prob = detail::get_number_or(j, "drop_prob", base.drop_prob, where);
  base.false_pos_rate_per_frame =
      detail::get_number_or(j, "false_pos_rate_per_frame", base.false_pos_rate_per_frame, where);
  return base;
}

json sensor_to_json(const SensorConfig& s) {
  return {{"max_range_m", s.max_range_m},
          {"camera_count", s.camera_count},
          {"fov_deg", s.fov_deg},
          {"sigma_pos_base_m", s.sigma_pos_base_m},
          {"sigma_pos_range_coeff", s.sigma_pos_range_coeff},
          {"sigma_yaw_rad", s.sigma_yaw_rad},
          {"drop_prob", s.drop_prob},
          {"false_pos_rate_per_frame", s.false_pos_rate_per_frame}};
}

ChannelModel parse_channel(const json& j, std::string_view where) {
  detail::require_object(j, where);
  detail::reject_unknown(j, {"latency_base_s", "latency_jitter_s", "drop_prob", "bandwidth_bytes_per_tick"}, where);
  ChannelModel c;
  c.latency_base_s = detail::get_number_or(j, "latency_base_s", c.latency_base_s, where);
  c.latency_jitter_s = detail::get_number_or(j, "latency_jitter_s", c.latency_jitter_s, where);
  c.drop_prob = detail::get_number_or(j, "drop_prob", c.drop_prob, where);
  c.bandwidth_bytes_per_tick = detail::get_number_or(j, "bandwidth_bytes_per_tick", c.bandwidth_bytes_per_tick, where);
  return c;
}

Vec2 parse_point(const json& j, std::string_view where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw SchemaError(std::string(where) + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

ActorSpec parse_actor(const json& j, std::size_t index) {
  const std::string where = "actors[" + std::to_string(index) + "]";
  detail::require_object(j, where);
  detail::reject_unknown(j,
                         {"id", "kind", "x", "y", "yaw_deg", "speed", "speed_profile", "waypoints", "length", "width",
                          "agent", "violation"},
                         where);
  ActorSpec a;
  a.id = static_cast<ActorId>(detail::get_uint(j, "id", where));
  a.kind = class_from_string(detail::get_string(j, "kind", where));
  a.initial.x = detail::get_number(j, "x", where);
  a.initial.y = detail::get_number(j, "y", where);
  a.initial.yaw = detail::get_number_or(j, "yaw_deg", 0.0, where) * kDeg;
  a.speed = detail::get_number_or(j, "speed", 0.0, where);
  const Footprint fp = default_footprint(a.kind);
  a.footprint.length = detail::get_number_or(j, "length", fp.length, where);
  a.footprint.width = detail::get_number_or(j, "width", fp.width, where);
  a.agent = detail::get_bool_or(j, "agent", false, where);
  if (j.contains("speed_profile")) {
    for (const json& k : detail::get_array(j, "speed_profile", where)) {
      const Vec2 p = parse_point(k, where + ".speed_profile");
      a.speed_profile.push_back({p.x, p.y});
    }
  }
  if (j.contains("waypoints")) {
    for (const json& w : detail::get_array(j, "waypoints", where)) a.waypoints.push_back(parse_point(w, where + ".waypoints"));
  }
  if (j.contains("violation")) {
    const Vec2 w = parse_point(j.at("violation"), where + ".violation");
    a.violation_window = std::make_pair(w.x, w.y);
  }
  return a;
}

}  // namespace

Scenario load_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("scenario document is not valid JSON: ") + e.what());
  }
  detail::require_object(doc, "document");
  detail::reject_unknown(doc, {"schema_version", "scenario"}, "document");
  const std::uint64_t version = detail::get_uint(doc, "schema_version", "document");
  if (version != 1) throw SchemaError("unsupported scenario schema_version " + std::to_string(version));

  const json& s = detail::field(doc, "scenario", "document");
  const std::string where = "scenario";
  detail::require_object(s, where);
  detail::reject_unknown(s,
                         {"id", "duration_s", "dt_s", "seed", "map_extent_m", "ego", "sensor", "channel", "actors",
                          "rsus", "static_occluders", "queries", "occlusion_tick"},
                         where);
  Scenario sc;
  sc.id = detail::get_string(s, "id", where);
  sc.duration_s = detail::get_number(s, "duration_s", where);
  sc.dt_s = detail::get_number_or(s, "dt_s", 0.1, where);
  if (s.contains("seed")) sc.seed = detail::get_uint(s, "seed", where);
  sc.map_extent_m = detail::get_number_or(s, "map_extent_m", 100.0, where);
  if (s.contains("ego")) sc.ego_id = static_cast<ActorId>(detail::get_uint(s, "ego", where));
  if (s.contains("sensor")) sc.vehicle_sensor = parse_sensor(s.at("sensor"), SensorConfig{}, "scenario.sensor");
  if (s.contains("channel")) sc.channel = parse_channel(s.at("channel"), "scenario.channel");
  const json& actors = detail::get_array(s, "actors", where);
  for (std::size_t i = 0; i < actors.size(); ++i) sc.actors.push_back(parse_actor(actors[i], i));
  if (s.contains("rsus")) {
    const json& rsus = detail::get_array(s, "rsus", where);
    for (std::size_t i = 0; i < rsus.size(); ++i) {
      const std::string w = "rsus[" + std::to_string(i) + "]";
      const json& r = rsus[i];
      detail::require_object(r, w);
      detail::reject_unknown(r, {"id", "x", "y", "yaw_deg", "sensor"}, w);
      RsuSpec rsu;
      rsu.id = static_cast<ActorId>(detail::get_uint(r, "id", w));
      rsu.pose = {detail::get_number(r, "x", w), detail::get_number(r, "y", w),
                  detail::get_number_or(r, "yaw_deg", 0.0, w) * kDeg};
      rsu.sensor = r.contains("sensor") ? parse_sensor(r.at("sensor"), sc.vehicle_sensor, w + ".sensor")
                                        : sc.vehicle_sensor;
      sc.rsus.push_back(rsu);
    }
  }
  if (s.contains("static_occluders")) {
    const json& occ = detail::get_array(s, "static_occluders", where);
    for (std::size_t i = 0; i < occ.size(); ++i) {
      const std::string w = "static_occluders[" + std::to_string(i) + "]";
      detail::require_object(occ[i], w);
      detail::reject_unknown(occ[i], {"x", "y", "yaw_deg", "length", "width"}, w);
      sc.static_occluders.push_back({{detail::get_number(occ[i], "x", w), detail::get_number(occ[i], "y", w)},
                                     detail::get_number_or(occ[i], "yaw_deg", 0.0, w) * kDeg,
                                     detail::get_number(occ[i], "length", w), detail::get_number(occ[i], "width", w)});
    }
  }
  if (s.contains("queries")) {
    const json& qs = detail::get_array(s, "queries", where);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const std::string w = "queries[" + std::to_string(i) + "]";
      detail::require_object(qs[i], w);
      detail::reject_unknown(qs[i], {"t_s", "text"}, w);
      sc.queries.push_back({detail::get_number(qs[i], "t_s", w), detail::get_string(qs[i], "text", w)});
    }
  }
  if (s.contains("occlusion_tick")) sc.occlusion_tick = static_cast<std::int64_t>(detail::get_uint(s, "occlusion_tick", where));
  sc.validate();
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string dump_scenario(const Scenario& sc) {
  json s;
  s["id"] = sc.id;
  s["duration_s"] = sc.duration_s;
  s["dt_s"] = sc.dt_s;
  s["seed"] = sc.seed;
  s["map_extent_m"] = sc.map_extent_m;
  if (sc.ego_id) s["ego"] = *sc.ego_id;
  s["sensor"] = sensor_to_json(sc.vehicle_sensor);
  s["channel"] = {{"latency_base_s", sc.channel.latency_base_s},
                  {"latency_jitter_s", sc.channel.latency_jitter_s},
                  {"drop_prob", sc.channel.drop_prob},
                  {"bandwidth_bytes_per_tick", sc.channel.bandwidth_bytes_per_tick}};
  json actors = json::array();
  for (const ActorSpec& a : sc.actors) {
    json ja = {{"id", a.id},
               {"kind", [&] {
                  std::string k(to_string(a.kind));
                  for (char& ch : k) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                  return k;
                }()},
               {"x", a.initial.x},
               {"y", a.initial.y},
               {"yaw_deg", a.initial.yaw / kDeg},
               {"speed", a.speed},
               {"length", a.footprint.length},
               {"width", a.footprint.width}};
    if (a.agent) ja["agent"] = true;
    if (!a.speed_profile.empty()) {
      json sp = json::array();
      for (const SpeedKnot& k : a.speed_profile) sp.push_back({k.t_s, k.speed});
      ja["speed_profile"] = sp;
    }
    if (!a.waypoints.empty()) {
      json wp = json::array();
      for (const Vec2& w : a.waypoints) wp.push_back({w.x, w.y});
      ja["waypoints"] = wp;
    }
    if (a.violation_window) ja["violation"] = {a.violation_window->first, a.violation_window->second};
    actors.push_back(ja);
  }
  s["actors"] = actors;
  json rsus = json::array();
  for (const RsuSpec& r : sc.rsus) {
    rsus.push_back({{"id", r.id},
                    {"x", r.pose.x},
                    {"y", r.pose.y},
                    {"yaw_deg", r.pose.yaw / kDeg},
                    {"sensor", sensor_to_json(r.sensor)}});
  }
  s["rsus"] = rsus;
  json occ = json::array();
  for (const OrientedRect& o : sc.static_occluders) {
    occ.push_back({{"x", o.center.x}, {"y", o.center.y}, {"yaw_deg", o.yaw / kDeg}, {"length", o.length}, {"width", o.width}});
  }
  if (!occ.empty()) s["static_occluders"] = occ;
  json qs = json::array();
  for (const ScriptedQuery& q : sc.queries) qs.push_back({{"t_s", q.t_s}, {"text", q.text}});
  if (!qs.empty()) s["queries"] = qs;
  if (sc.occlusion_tick) s["occlusion_tick"] = *sc.occlusion_tick;
  json doc = {{"schema_version", 1}, {"scenario", s}};
  return doc.dump(2) + "\n";
}

}  // namespace sentinel
