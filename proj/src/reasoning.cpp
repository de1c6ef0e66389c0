#include "sentinel/reasoning.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "json_util.hpp"

namespace sentinel {

namespace {

constexpr std::array<std::string_view, 8> kMissionNames = {
    "SafetyEvaluation",  "DrivingCondition",       "TrafficCondition",  "TrafficViolation",
    "AccidentPrediction", "AccidentResponsibility", "CausationAnalysis", "TrafficSituation",
};

constexpr std::array<std::string_view, 4> kSeverityNames = {"Info", "Caution", "Warning", "Critical"};

}  // namespace

std::string_view to_string(Mission m) { return kMissionNames[static_cast<std::size_t>(m)]; }

Mission mission_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kMissionNames.size(); ++i) {
    if (kMissionNames[i] == s) return static_cast<Mission>(i);
  }
  throw SchemaError("unknown mission '" + std::string(s) + "'");
}

std::string_view to_string(QueryMode m) { return m == QueryMode::Active ? "active" : "passive"; }

std::string_view to_string(Severity s) { return kSeverityNames[static_cast<std::size_t>(s)]; }

Severity severity_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kSeverityNames.size(); ++i) {
    if (kSeverityNames[i] == s) return static_cast<Severity>(i);
  }
  throw ParseError("unknown severity '" + std::string(s) + "'");
}

RiskScore compute_risk_intensity(const PerceptionProduct& p, const Pose2& ego_pose, const RiskConfig& cfg) {
  RiskScore r;
  for (const CollisionPrediction& c : p.collisions) {
    if (!r.min_ttc_s || c.ttc_s < *r.min_ttc_s) {
      r.min_ttc_s = c.ttc_s;
      r.ttc_pair = std::make_pair(c.track_a, c.track_b);
    }
  }
  for (const Detection3D& d : p.detections) {
    const double dist = distance(d.center, ego_pose.position());
    if (dist <= cfg.ego_exclusion_m) continue;
    if (dist < r.nearest_distance_m) {
      r.nearest_distance_m = dist;
      r.nearest_track = d.track_id != 0 ? std::optional<std::uint32_t>(d.track_id) : std::nullopt;
    }
  }
  if (r.min_ttc_s) r.ttc_term = std::max(0.0, 1.0 - *r.min_ttc_s / cfg.ttc_scale_s);
  if (std::isfinite(r.nearest_distance_m)) {
    r.proximity_term = std::max(0.0, 1.0 - r.nearest_distance_m / cfg.proximity_scale_m);
  }
  r.violation_term = p.violations.empty() ? 0.0 : 1.0;
  r.value = std::clamp(cfg.w_ttc * r.ttc_term + cfg.w_proximity * r.proximity_term + cfg.w_violation * r.violation_term,
                       0.0, 1.0);
  return r;
}

std::string bundle_digest(const std::string& episode_id, std::int64_t tick) {
  return hex64(fnv1a64(episode_id + "#" + std::to_string(tick)));
}

InputBundle build_input_bundle(const std::string& episode_id, const PerceptionProduct* p, double time_s,
                               const Pose2& ego_pose, std::span<const DialogueTurn> dialogue,
                               std::vector<std::string> label_refs, const RiskConfig& risk_cfg) {
  if (p == nullptr) throw MissingPerception("input bundle requires a perception product");
  InputBundle b;
  b.episode_id = episode_id;
  b.tick = p->tick;
  b.time_s = time_s;
  b.digest = bundle_digest(episode_id, p->tick);
  b.ego_pose = ego_pose;
  b.risk = compute_risk_intensity(*p, ego_pose, risk_cfg);

  for (const Track& t : p->tracks) {
    b.scene.tracks.push_back({t.id, t.cls, t.position, t.speed(), distance(t.position, ego_pose.position())});
  }
  std::stable_sort(b.scene.tracks.begin(), b.scene.tracks.end(), [](const TrackBrief& a, const TrackBrief& c) {
    return a.distance_m < c.distance_m || (a.distance_m == c.distance_m && a.id < c.id);
  });
  b.scene.collisions = p->collisions;
  std::stable_sort(b.scene.collisions.begin(), b.scene.collisions.end(),
                   [](const CollisionPrediction& a, const CollisionPrediction& c) {
                     return std::tie(a.ttc_s, a.track_a, a.track_b) < std::tie(c.ttc_s, c.track_a, c.track_b);
                   });
  b.scene.violations = p->violations;

  const std::size_t n = std::min(dialogue.size(), kDialogueTail);
  b.dialogue_tail.assign(dialogue.end() - static_cast<std::ptrdiff_t>(n), dialogue.end());
  b.label_refs = std::move(label_refs);
  return b;
}

namespace {

std::string_view risk_band(double v) {
  if (v < 0.3) return "low";
  if (v < 0.6) return "medium";
  return "high";
}

}  // namespace

std::vector<std::string> job_tags(Mission mission, QueryMode mode, const RiskScore& risk, const SceneBrief& scene) {
  std::set<std::string> tags;
  tags.insert("mission:" + std::string(to_string(mission)));
  tags.insert("mode:" + std::string(to_string(mode)));
  tags.insert("risk:" + std::string(risk_band(risk.value)));
  if (!scene.collisions.empty()) tags.insert("hazard:collision");
  if (risk.proximity_term > 0.0) tags.insert("hazard:proximity");
  if (risk.violation_term > 0.0) tags.insert("hazard:violation");
  for (const TrackBrief& t : scene.tracks) {
    std::string name(to_string(t.cls));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    tags.insert("class:" + name);
  }
  return {tags.begin(), tags.end()};
}

void AlertConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("alert threshold must lie in [0,1]");
  if (!(cooldown_s >= 0.0)) throw ConfigError("alert cooldown must be non-negative");
}

Mission dominant_mission(const RiskScore& risk, const RiskConfig& cfg) {
  const double t = cfg.w_ttc * risk.ttc_term;
  const double p = cfg.w_proximity * risk.proximity_term;
  const double v = cfg.w_violation * risk.violation_term;
  if (t >= p && t >= v) return Mission::AccidentPrediction;
  if (p >= v) return Mission::SafetyEvaluation;
  return Mission::TrafficViolation;
}

PassiveTrigger::PassiveTrigger(AlertConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void PassiveTrigger::set_threshold(double value) {
  AlertConfig next = cfg_;
  next.threshold = value;
  next.validate();
  cfg_ = next;
}

std::optional<QueryJob> PassiveTrigger::poll(const InputBundle& bundle) {
  if (bundle.risk.value < cfg_.threshold - 1e-12) return std::nullopt;
  // Cooldown is measured on bundle time; a gap of exactly the cooldown fires.
  if (last_fire_s_ && bundle.time_s - *last_fire_s_ < cfg_.cooldown_s - 1e-9) return std::nullopt;
  last_fire_s_ = bundle.time_s;

  QueryJob job;
  job.mode = QueryMode::Passive;
  job.mission = dominant_mission(bundle.risk);
  job.tick = bundle.tick;
  job.time_s = bundle.time_s;
  job.risk = bundle.risk;
  job.scene = bundle.scene;
  job.bundle_digest = bundle.digest;
  job.tags = job_tags(job.mission, job.mode, job.risk, job.scene);
  job.text = "Assess the current hazard and warn the driver.";
  return job;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

// Kept identical to data/mission_rubric.json; a unit test checks the two agree.
constexpr std::string_view kBuiltinRubric = R"({
  "rubric_version": 1,
  "missions": [
    {"mission": "AccidentResponsibility", "keywords": ["fault", "blame", "responsible", "responsibility", "liable", "liability"]},
    {"mission": "AccidentPrediction", "keywords": ["hit", "collide", "collision", "going to", "impact", "rear end"]},
    {"mission": "CausationAnalysis", "keywords": ["why", "cause", "caused", "reason", "because", "how did"]},
    {"mission": "TrafficViolation", "keywords": ["violation", "violate", "illegal", "red light", "speeding", "rule", "law"]},
    {"mission": "SafetyEvaluation", "keywords": ["safe", "safety", "danger", "dangerous", "risk", "risky", "hazard"]},
    {"mission": "DrivingCondition", "keywords": ["road", "surface", "weather", "visibility", "wet", "icy", "lane"]},
    {"mission": "TrafficCondition", "keywords": ["traffic", "congestion", "jam", "flow", "busy", "queue"]},
    {"mission": "TrafficSituation", "keywords": ["situation", "scene", "around", "overview", "describe", "happening"]}
  ]
})";

bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

}  // namespace

MissionRubric MissionRubric::builtin() { return from_json(kBuiltinRubric); }

MissionRubric MissionRubric::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("mission rubric is not valid JSON: ") + e.what());
  }
  detail::require_object(doc, "rubric");
  const auto& root = doc;
  detail::reject_unknown(root, {"rubric_version", "missions"}, "rubric");
  MissionRubric r;
  r.version_ = static_cast<int>(detail::get_uint(root, "rubric_version", "rubric"));
  for (const auto& item : detail::get_array(root, "missions", "rubric")) {
    detail::require_object(item, "rubric.missions[]");
    const auto& obj = item;
    detail::reject_unknown(obj, {"mission", "keywords"}, "rubric.missions[]");
    Entry e{mission_from_string(detail::get_string(obj, "mission", "rubric.missions[]")), {}};
    for (const auto& kw : detail::get_array(obj, "keywords", "rubric.missions[]")) {
      if (!kw.is_string()) throw SchemaError("rubric keywords must be strings");
      std::string lowered = kw.get<std::string>();
      std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      e.keywords.push_back(std::move(lowered));
    }
    r.entries_.push_back(std::move(e));
  }
  return r;
}

MissionRubric MissionRubric::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mission rubric '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Mission MissionRubric::classify(std::string_view text) const {
  const auto tokens = tokenize(text);
  Mission best = Mission::TrafficSituation;
  int best_hits = 0;
  for (const Entry& e : entries_) {
    int hits = 0;
    for (const std::string& kw : e.keywords) {
      if (contains_phrase(tokens, tokenize(kw))) ++hits;
    }
    if (hits > best_hits) {
      best_hits = hits;
      best = e.mission;
    }
  }
  return best;
}

QueryJob submit_active_query(const InputBundle& bundle, std::string_view text, const MissionRubric& rubric) {
  const bool blank = std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
  if (blank) throw EmptyQuery("active query text is empty");
  QueryJob job;
  job.mode = QueryMode::Active;
  job.mission = rubric.classify(text);
  job.text = std::string(text);
  job.tick = bundle.tick;
  job.time_s = bundle.time_s;
  job.risk = bundle.risk;
  job.scene = bundle.scene;
  job.bundle_digest = bundle.digest;
  job.tags = job_tags(job.mission, job.mode, job.risk, job.scene);
  return job;
}

}  // namespace sentinel
