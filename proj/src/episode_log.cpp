#include "sentinel/episode_log.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sentinel/v2x.hpp"

namespace sentinel {

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ParseError("base64: length is not a multiple of 4");
  std::array<int, 256> rev;
  rev.fill(-1);
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) rev[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (!last || k < 2) throw ParseError("base64: misplaced padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad) throw ParseError("base64: data after padding");
      const int d = rev[static_cast<unsigned char>(c)];
      if (d < 0) throw ParseError("base64: invalid character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

json header_json(const LogHeader& h) {
  return {{"type", "header"},
          {"format", kLogFormat},
          {"format_version", kLogVersion},
          {"wire_schema_version", kWireSchemaVersion},
          {"scenario_id", h.scenario_id},
          {"seed", h.seed},
          {"episode_id", h.episode_id},
          {"config",
           {{"threshold", h.threshold},
            {"renewal_rate", h.renewal_rate},
            {"level", to_string(h.level)},
            {"llm", h.llm}}},
          {"mock_rubric", kMockRubricVersion},
          {"rater", kRaterVersion}};
}

json grid_json(const BevGrid& grid) {
  std::vector<std::uint8_t> q(grid.cells().size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = quantize_probability(grid.cells()[i]);
  const GridSpec& s = grid.spec();
  return {{"cells_x", s.cells_x},
          {"cells_y", s.cells_y},
          {"resolution", s.resolution},
          {"origin", {s.origin.x, s.origin.y}},
          {"encoding", "u8-base64"},
          {"data", base64_encode(q)}};
}

BevGrid grid_from_json(const json& j) {
  try {
    GridSpec s;
    s.cells_x = j.at("cells_x").get<int>();
    s.cells_y = j.at("cells_y").get<int>();
    s.resolution = j.at("resolution").get<double>();
    s.origin = {j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()};
    s.validate();
    const std::vector<std::uint8_t> q = base64_decode(j.at("data").get<std::string>());
    if (q.size() != s.size()) throw SchemaError("grid data does not match its dimensions");
    BevGrid g(s, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) g.cells()[i] = dequantize_probability(q[i]);
    return g;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("grid: ") + e.what());
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("grid: ") + e.what());
  } catch (const ParseError& e) {
    throw SchemaError(std::string("grid: ") + e.what());
  }
}

json detection_json(const Detection3D& d) {
  return {{"cls", to_string(d.cls)},   {"x", d.center.x},
          {"y", d.center.y},           {"yaw", d.yaw},
          {"length", d.footprint.length}, {"width", d.footprint.width},
          {"confidence", d.confidence}, {"speed", d.speed},
          {"track", d.track_id},       {"peripheral", d.peripheral}};
}

Detection3D detection_from_json(const json& j) {
  try {
    Detection3D d;
    d.cls = class_from_string(j.at("cls").get<std::string>());
    d.center = {j.at("x").get<double>(), j.at("y").get<double>()};
    d.yaw = j.at("yaw").get<double>();
    d.footprint = {j.at("length").get<double>(), j.at("width").get<double>()};
    d.confidence = j.at("confidence").get<double>();
    d.speed = j.at("speed").get<double>();
    d.track_id = j.at("track").get<std::uint32_t>();
    d.peripheral = j.at("peripheral").get<bool>();
    return d;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("detection: ") + e.what());
  }
}

json actor_json(const ActorState& a) {
  return {{"id", a.id},         {"cls", to_string(a.kind)},  {"x", a.position.x},
          {"y", a.position.y},  {"yaw", a.yaw},              {"speed", a.speed},
          {"length", a.footprint.length}, {"width", a.footprint.width}, {"violating", a.violating}};
}

ActorState actor_from_json(const json& j) {
  try {
    ActorState a;
    a.id = j.at("id").get<ActorId>();
    a.kind = class_from_string(j.at("cls").get<std::string>());
    a.position = {j.at("x").get<double>(), j.at("y").get<double>()};
    a.yaw = j.at("yaw").get<double>();
    a.speed = j.at("speed").get<double>();
    a.footprint = {j.at("length").get<double>(), j.at("width").get<double>()};
    a.violating = j.at("violating").get<bool>();
    return a;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("actor: ") + e.what());
  }
}

json track_json(const Track& t) {
  return {{"id", t.id},       {"cls", to_string(t.cls)}, {"x", t.position.x},
          {"y", t.position.y}, {"vx", t.velocity.x},      {"vy", t.velocity.y},
          {"yaw", t.yaw},     {"yaw_rate", t.yaw_rate},  {"length", t.footprint.length},
          {"width", t.footprint.width}, {"hits", t.hits}};
}

json collision_prediction_json(const CollisionPrediction& c) {
  return {{"a", c.track_a}, {"b", c.track_b}, {"ttc_s", c.ttc_s}, {"x", c.closest_point.x}, {"y", c.closest_point.y}};
}

json product_json(const PerceptionProduct& p, bool complete, double fired_at_s, bool with_grid) {
  json dets = json::array();
  for (const Detection3D& d : p.detections) dets.push_back(detection_json(d));
  json tracks = json::array();
  for (const Track& t : p.tracks) tracks.push_back(track_json(t));
  json forecasts = json::array();
  for (const TrajectoryForecast& f : p.forecasts) {
    json pts = json::array();
    for (const ForecastPoint& fp : f.points) pts.push_back({fp.t_s, fp.position.x, fp.position.y});
    forecasts.push_back({{"track", f.track_id}, {"model", f.model == MotionModel::CV ? "CV" : "CTRV"}, {"points", pts}});
  }
  json collisions = json::array();
  for (const CollisionPrediction& c : p.collisions) collisions.push_back(collision_prediction_json(c));
  json out = {{"complete", complete},        {"fired_at_s", fired_at_s},
              {"agents", p.contributing_agents}, {"detections", dets},
              {"tracks", tracks},            {"forecasts", forecasts},
              {"collisions", collisions},    {"violations", p.violations}};
  out["grid"] = with_grid && p.fused_grid.spec().size() > 0 && !p.fused_grid.cells().empty() ? grid_json(p.fused_grid)
                                                                                              : json(nullptr);
  return out;
}

json risk_json(const RiskScore& r) {
  json pair = r.ttc_pair ? json::array({r.ttc_pair->first, r.ttc_pair->second}) : json(nullptr);
  return {{"value", r.value},
          {"ttc_term", r.ttc_term},
          {"proximity_term", r.proximity_term},
          {"violation_term", r.violation_term},
          {"min_ttc_s", optional_number(r.min_ttc_s)},
          {"ttc_pair", pair},
          {"nearest_track", r.nearest_track ? json(*r.nearest_track) : json(nullptr)},
          {"nearest_distance_m", std::isfinite(r.nearest_distance_m) ? json(r.nearest_distance_m) : json(nullptr)}};
}

json alert_json(const SafetyAlert& a) {
  json ev = json::array();
  for (const EvidenceRef& r : a.evidence) ev.push_back(r.str());
  return {{"tick", a.tick},
          {"mode", to_string(a.mode)},
          {"mission", to_string(a.mission)},
          {"severity", to_string(a.severity)},
          {"text", a.text},
          {"evidence", ev},
          {"fallback", a.fallback},
          {"templated", a.templated}};
}

json decision_frame_json(const DecisionFrame& f) {
  json decision = nullptr;
  if (f.decision) {
    json ev = json::array();
    for (const EvidenceRef& r : f.decision->evidence) ev.push_back(r.str());
    decision = {{"steps", f.decision->steps},
                {"final", f.decision->final_text},
                {"severity", to_string(f.decision->severity)},
                {"evidence", ev}};
  }
  return {{"tick", f.tick},
          {"mode", to_string(f.job.mode)},
          {"mission", to_string(f.job.mission)},
          {"question", f.job.text},
          {"tags", f.job.tags},
          {"bundle_digest", f.job.bundle_digest},
          {"prompt_digest", f.prompt_digest},
          {"prompt_chars", f.prompt_chars},
          {"sampled_boxes", f.sampled_box_ids},
          {"risk", f.risk.value},
          {"decision", decision},
          {"failure", f.failure},
          {"alert", f.alert ? alert_json(*f.alert) : json(nullptr)}};
}

json tick_record(const TraceTick& tick, const TickReasoning& reasoning) {
  json truth = json::array();
  for (const ActorState& a : tick.world.actors) truth.push_back(actor_json(a));
  json collisions = json::array();
  for (const CollisionEvent& c : tick.collisions) {
    collisions.push_back({{"a", c.actor_a}, {"b", c.actor_b}, {"overlap_m", c.overlap_m}});
  }
  json frames = json::array();
  json alerts = json::array();
  for (const DecisionFrame& f : reasoning.frames) {
    frames.push_back(decision_frame_json(f));
    if (f.alert) alerts.push_back(alert_json(*f.alert));
  }
  return {{"type", "tick"},
          {"tick", tick.tick},
          {"time_s", tick.time_s},
          {"world_digest", world_digest(tick.world)},
          {"ego", {tick.ego_pose.x, tick.ego_pose.y, tick.ego_pose.yaw}},
          {"truth", truth},
          {"collisions", collisions},
          {"perception", tick.product ? product_json(*tick.product, tick.complete, tick.fired_at_s) : json(nullptr)},
          {"risk", reasoning.risk ? risk_json(*reasoning.risk) : json(nullptr)},
          {"decision_frames", frames},
          {"alerts", alerts},
          {"errors", reasoning.errors}};
}

json summary_json(const PerceptionTrace& trace, const EpisodeReasoning& reasoning, int exit_code) {
  json boxes = json::array();
  for (const CorpusBox& b : reasoning.committed) boxes.push_back(json::parse(box_to_json_line(b)));
  json dialogue = json::array();
  for (const DialogueTurn& t : reasoning.dialogue) dialogue.push_back({{"speaker", t.speaker}, {"text", t.text}});
  json per_mission = json::object();
  for (Mission m : kAllMissions) per_mission[std::string(to_string(m))] = 0;
  for (const SafetyAlert& a : reasoning.alerts) per_mission[std::string(to_string(a.mission))] = per_mission[std::string(to_string(a.mission))].get<int>() + 1;
  return {{"type", "summary"},
          {"ticks", trace.ticks.size()},
          {"collision_tick", trace.first_collision_tick ? json(*trace.first_collision_tick) : json(nullptr)},
          {"exit_code", exit_code},
          {"decision_frames", reasoning.frames.size()},
          {"alerts", reasoning.alerts.size()},
          {"alerts_by_mission", per_mission},
          {"committed_boxes", boxes},
          {"dialogue", dialogue},
          {"channel",
           {{"sent", trace.sent},
            {"delivered", trace.delivered},
            {"dropped", trace.dropped},
            {"discarded_stale", trace.discarded_stale},
            {"discarded_late", trace.discarded_late}}}};
}

std::string render_episode_log(const LogHeader& header, const PerceptionTrace& trace,
                               const EpisodeReasoning& reasoning, int exit_code) {
  std::string out = header_json(header).dump() + "\n";
  for (std::size_t i = 0; i < trace.ticks.size(); ++i) {
    const TickReasoning empty;
    out += tick_record(trace.ticks[i], i < reasoning.ticks.size() ? reasoning.ticks[i] : empty).dump() + "\n";
  }
  out += summary_json(trace, reasoning, exit_code).dump() + "\n";
  out += json{{"type", "checksum"}, {"fnv1a64", hex64(fnv1a64(out))}}.dump() + "\n";
  return out;
}

EpisodeLog parse_episode_log(std::string_view text) {
  const std::size_t last_line = text.size() >= 2 ? text.rfind('\n', text.size() - 2) : std::string_view::npos;
  if (text.empty() || text.back() != '\n' || last_line == std::string_view::npos) {
    throw SchemaError("episode log is truncated");
  }
  const std::string_view body = text.substr(0, last_line + 1);
  json check;
  try {
    check = json::parse(text.substr(last_line + 1));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("episode log checksum line: ") + e.what());
  }
  if (check.value("type", "") != "checksum") throw SchemaError("episode log has no checksum line");
  if (check.value("fnv1a64", "") != hex64(fnv1a64(body))) throw SchemaError("episode log checksum mismatch");

  EpisodeLog log;
  std::size_t pos = 0;
  bool have_summary = false;
  while (pos < body.size()) {
    const std::size_t nl = body.find('\n', pos);
    json rec;
    try {
      rec = json::parse(body.substr(pos, nl - pos));
    } catch (const json::exception& e) {
      throw SchemaError(std::string("episode log record: ") + e.what());
    }
    pos = nl + 1;
    const std::string type = rec.value("type", "");
    if (log.header.is_null()) {
      if (type != "header" || rec.value("format", "") != kLogFormat) throw SchemaError("episode log has no header");
      log.header = std::move(rec);
    } else if (type == "tick") {
      if (have_summary) throw SchemaError("tick record after the summary");
      if (rec.value("tick", std::int64_t{-1}) != static_cast<std::int64_t>(log.ticks.size())) {
        throw SchemaError("episode log ticks are not contiguous");
      }
      log.ticks.push_back(std::move(rec));
    } else if (type == "summary" && !have_summary) {
      log.summary = std::move(rec);
      have_summary = true;
    } else {
      throw SchemaError("unexpected episode log record '" + type + "'");
    }
  }
  if (!have_summary) throw SchemaError("episode log has no summary");
  return log;
}

EpisodeLog read_episode_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read episode log '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_episode_log(ss.str());
}

std::string StreamEvent::sse() const {
  return "id: " + std::to_string(tick) + "\nevent: " + name + "\ndata: " + data.dump() + "\n\n";
}

std::vector<StreamEvent> stream_events(const json& record) {
  std::vector<StreamEvent> out;
  const std::int64_t tick = record.at("tick").get<std::int64_t>();
  const json& p = record.at("perception");
  if (!p.is_null()) {
    json tracks = json::array();
    for (const json& t : p.at("tracks")) {
      tracks.push_back({{"id", t.at("id")}, {"cls", t.at("cls")}, {"x", t.at("x")}, {"y", t.at("y")},
                        {"vx", t.at("vx")}, {"vy", t.at("vy")}, {"yaw", t.at("yaw")}});
    }
    json forecasts = json::array();
    for (const json& f : p.at("forecasts")) {
      // Overlay resolution: every tenth point is enough for a drawn polyline.
      json pts = json::array();
      const json& all = f.at("points");
      for (std::size_t i = 9; i < all.size(); i += 10) pts.push_back({all[i][1], all[i][2]});
      forecasts.push_back({{"track", f.at("track")}, {"points", pts}});
    }
    const json& risk = record.at("risk");
    out.push_back({"frame",
                   tick,
                   {{"tick", tick},
                    {"time_s", record.at("time_s")},
                    {"ego", record.at("ego")},
                    {"risk", risk.is_null() ? json(nullptr) : risk.at("value")},
                    {"complete", p.at("complete")},
                    {"tracks", tracks},
                    {"forecasts", forecasts},
                    {"collisions", p.at("collisions")},
                    {"violations", p.at("violations")},
                    {"world_collisions", record.at("collisions")}}});
  }
  for (const json& f : record.at("decision_frames")) {
    if (f.at("alert").is_null()) continue;
    json a = f.at("alert");
    if (a.at("mode") == "active") a["question"] = f.at("question");
    out.push_back({"alert", tick, std::move(a)});
  }
  return out;
}

}  // namespace sentinel
