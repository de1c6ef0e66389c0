#include "sentinel/eval.hpp"

#include <cstdio>
#include <fstream>
#include <future>

#include "sentinel/episode_log.hpp"

namespace sentinel {

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string num(const std::optional<double>& v, int prec = 3) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, *v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string rpad(const std::string& s, std::size_t w) { return s.size() < w ? std::string(w - s.size(), ' ') + s : s; }

}  // namespace

PerceptionReport evaluate_logs(const std::vector<std::filesystem::path>& logs) {
  if (logs.empty()) throw IoError("no episode logs given");
  std::vector<EvalFrame> frames;
  std::vector<double> miou;
  std::vector<LabelRaster> vpq_pred;
  std::vector<LabelRaster> vpq_gt;
  for (const auto& path : logs) {
    const EpisodeLog log = read_episode_log(path);
    for (const json& rec : log.ticks) {
      const json& p = rec.at("perception");
      if (p.is_null()) continue;
      std::vector<ActorState> truth;
      for (const json& a : rec.at("truth")) truth.push_back(actor_from_json(a));
      EvalFrame f;
      for (const json& d : p.at("detections")) f.preds.push_back(detection_from_json(d));
      for (const ActorState& a : truth) {
        Detection3D g;
        g.cls = a.kind;
        g.center = a.position;
        g.yaw = a.yaw;
        g.footprint = a.footprint;
        g.speed = a.speed;
        g.confidence = 1.0;
        f.gts.push_back(g);
      }
      frames.push_back(std::move(f));

      if (!p.at("grid").is_null()) {
        const BevGrid fused = grid_from_json(p.at("grid"));
        miou.push_back(bev_miou(fused, rasterize_truth(truth, fused.spec())));

        std::vector<OrientedRect> rects;
        std::vector<std::uint32_t> ids;
        for (const json& t : p.at("tracks")) {
          rects.push_back({{t.at("x").get<double>(), t.at("y").get<double>()},
                           t.at("yaw").get<double>(),
                           t.at("length").get<double>(),
                           t.at("width").get<double>()});
          ids.push_back(t.at("id").get<std::uint32_t>());
        }
        vpq_pred.push_back(rasterize_instances(rects, ids, fused.spec()));
        rects.clear();
        ids.clear();
        for (const ActorState& a : truth) {
          rects.push_back(a.rect());
          ids.push_back(a.id);
        }
        vpq_gt.push_back(rasterize_instances(rects, ids, fused.spec()));
      }
    }
  }

  PerceptionReport r;
  r.logs = logs.size();
  r.frames = frames.size();
  if (frames.empty()) return r;
  for (ObjectClass c : kAllClasses) {
    try {
      r.ap[class_index(c)] = average_precision(frames, c);
    } catch (const NoGroundTruth&) {
    }
  }
  r.map = mean_average_precision(frames);
  r.tp = tp_metrics(frames);
  std::size_t matched = 0;
  std::size_t total = 0;
  for (const EvalFrame& f : frames) {
    matched += match_detections(f.preds, f.gts).pairs.size();
    total += f.gts.size();
  }
  r.recall = total ? static_cast<double>(matched) / static_cast<double>(total) : 0.0;
  if (!miou.empty()) {
    double s = 0.0;
    for (double v : miou) s += v;
    r.miou = s / static_cast<double>(miou.size());
    r.vpq = motion_vpq(vpq_pred, vpq_gt);
  }
  return r;
}

nlohmann::json perception_report_json(const PerceptionReport& r) {
  json ap = json::object();
  json tp = json::array();
  for (ObjectClass c : kAllClasses) {
    const auto& v = r.ap[class_index(c)];
    ap[std::string(to_string(c))] = v ? json(*v) : json(nullptr);
    const TpRow& row = r.tp[class_index(c)];
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    tp.push_back({{"class", to_string(c)},
                  {"matches", row.matches},
                  {"mATE", opt(row.mate)},
                  {"mASE", opt(row.mase)},
                  {"mAOE", opt(row.maoe)},
                  {"mAVE", opt(row.mave)}});
  }
  return {{"logs", r.logs},
          {"frames", r.frames},
          {"match_threshold_m", kMatchThreshold},
          {"mAP", r.map},
          {"ap", ap},
          {"recall", r.recall},
          {"bev_miou", r.miou ? json(*r.miou) : json(nullptr)},
          {"motion_vpq", r.vpq ? json(*r.vpq) : json(nullptr)},
          {"per_class", tp}};
}

std::string perception_report_text(const PerceptionReport& r) {
  std::string s;
  s += "perception report: " + std::to_string(r.logs) + " log(s), " + std::to_string(r.frames) + " fused frames\n\n";
  s += pad("Detection mAP (%)", 22) + rpad(pct(100.0 * r.map), 8) + "\n";
  s += pad("Recall (%)", 22) + rpad(pct(100.0 * r.recall), 8) + "\n";
  s += pad("mIOU (%)", 22) + rpad(r.miou ? pct(100.0 * *r.miou) : "-", 8) + "\n";
  s += pad("VPQ (%)", 22) + rpad(r.vpq ? pct(100.0 * *r.vpq) : "-", 8) + "\n\n";
  s += pad("class", 12) + rpad("mATE", 9) + rpad("mASE", 9) + rpad("mAOE", 9) + rpad("mAVE", 9) + rpad("n", 8) + "\n";
  for (ObjectClass c : kAllClasses) {
    const TpRow& row = r.tp[class_index(c)];
    s += pad(std::string(to_string(c)), 12) + rpad(num(row.mate), 9) + rpad(num(row.mase), 9) +
         rpad(num(row.maoe), 9) + rpad(num(row.mave), 9) + rpad(std::to_string(row.matches), 8) + "\n";
  }
  return s;
}

std::vector<PerceptionTrace> simulate_suite(std::vector<Scenario>& suite, std::uint64_t seed) {
  for (Scenario& sc : suite) sc.seed = keyed_rng({seed, fnv1a64(sc.id)})();
  std::vector<std::future<PerceptionTrace>> jobs;
  for (const Scenario& sc : suite) {
    jobs.push_back(std::async(std::launch::async, [&sc] { return simulate_perception(sc); }));
  }
  std::vector<PerceptionTrace> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

SweepColumn run_sweep_column(const std::vector<Scenario>& suite, const std::vector<PerceptionTrace>& traces,
                             double renewal_rate, PromptLevel level, const SweepOptions& opts) {
  SweepColumn col;
  CorpusStore store;
  MockLlmClient llm;
  const MissionRubric rubric = MissionRubric::builtin();
  std::int64_t offset = 0;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    for (std::size_t i = 0; i < suite.size(); ++i) {
      EpisodeSpec spec;
      spec.episode_id = suite[i].id + "-e" + std::to_string(epoch);
      spec.corpus_tick_offset = offset;
      spec.renewal_rate = renewal_rate;
      spec.finalize_k = opts.candidate_k;
      spec.reasoning = ReasoningConfig::for_level(level);
      spec.reasoning.alert.threshold = opts.threshold;
      const EpisodeReasoning er = run_reasoning(suite[i], traces[i], spec, llm, store, rubric);
      col.histogram += rate_alerts(er.alerts, evidence_index(traces[i]));
      col.decision_frames += er.frames.size();
      col.committed_boxes += er.committed.size();
      offset += static_cast<std::int64_t>(traces[i].ticks.size());
    }
  }
  return col;
}

SweepTable run_renewal_sweep(std::vector<Scenario> suite, const std::vector<double>& rates, std::uint64_t seed,
                             const SweepOptions& opts) {
  if (suite.empty()) throw ValidationError("renewal sweep needs at least one scenario");
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("renewal rate must lie in [0,1]");
  }
  const std::vector<PerceptionTrace> traces = simulate_suite(suite, seed);
  // Columns are independent; each one commits its own corpus in order.
  std::vector<std::future<SweepColumn>> jobs;
  for (double r : rates) {
    jobs.push_back(std::async(std::launch::async, [&, r] { return run_sweep_column(suite, traces, r, opts.level, opts); }));
  }
  SweepTable t{"renewal", "renewal_rate", {}};
  for (std::size_t i = 0; i < rates.size(); ++i) {
    SweepColumn c = jobs[i].get();
    char label[32];
    std::snprintf(label, sizeof(label), "rho=%.1f", rates[i]);
    c.label = label;
    c.parameter = rates[i];
    t.columns.push_back(std::move(c));
  }
  return t;
}

SweepTable run_intensity_sweep(std::vector<Scenario> suite, const std::vector<PromptLevel>& levels,
                               std::uint64_t seed, const SweepOptions& opts) {
  if (suite.empty()) throw ValidationError("intensity sweep needs at least one scenario");
  const std::vector<PerceptionTrace> traces = simulate_suite(suite, seed);
  std::vector<std::future<SweepColumn>> jobs;
  for (PromptLevel l : levels) {
    jobs.push_back(
        std::async(std::launch::async, [&, l] { return run_sweep_column(suite, traces, opts.renewal_rate, l, opts); }));
  }
  SweepTable t{"intensity", "prompt_level", {}};
  for (std::size_t i = 0; i < levels.size(); ++i) {
    SweepColumn c = jobs[i].get();
    c.label = std::string(to_string(levels[i]));
    c.label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(c.label[0])));
    c.parameter = static_cast<double>(level_budget(levels[i]));
    t.columns.push_back(std::move(c));
  }
  return t;
}

nlohmann::json sweep_json(const SweepTable& t) {
  json cols = json::array();
  for (const SweepColumn& c : t.columns) {
    json missions = json::object();
    for (Mission m : kAllMissions) {
      json row = json::object();
      for (Rating r : kAllRatings) row[std::string(to_string(r))] = c.histogram.percent(m, r);
      row["alerts"] = c.histogram.total(m);
      missions[std::string(to_string(m))] = row;
    }
    cols.push_back({{"label", c.label},
                    {"parameter", c.parameter},
                    {"missions", missions},
                    {"alerts", c.histogram.total()},
                    {"mean_good_percent", c.histogram.mean_good_percent()},
                    {"decision_frames", c.decision_frames},
                    {"committed_boxes", c.committed_boxes}});
  }
  return {{"sweep", t.name}, {"parameter", t.parameter}, {"rater", kRaterVersion}, {"columns", cols}};
}

std::string sweep_text(const SweepTable& t) {
  constexpr std::size_t kName = 24;
  constexpr std::size_t kCell = 7;
  std::string s = t.name + " sweep (" + t.parameter + "), bucket percentages per mission, rater " +
                  std::string(kRaterVersion) + "\n\n";
  s += pad("", kName);
  for (const SweepColumn& c : t.columns) s += "| " + pad(c.label, 4 * kCell);
  s += "\n" + pad("mission", kName);
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    s += "| ";
    for (Rating r : kAllRatings) s += pad(std::string(to_string(r)), kCell);
  }
  s += "\n";
  for (Mission m : kAllMissions) {
    s += pad(std::string(to_string(m)), kName);
    for (const SweepColumn& c : t.columns) {
      s += "| ";
      for (Rating r : kAllRatings) s += pad(pct(c.histogram.percent(m, r)), kCell);
    }
    s += "\n";
  }
  s += pad("mean Good%", kName);
  for (const SweepColumn& c : t.columns) s += "| " + pad(pct(c.histogram.mean_good_percent()), 4 * kCell);
  s += "\n" + pad("alerts rated", kName);
  for (const SweepColumn& c : t.columns) s += "| " + pad(std::to_string(c.histogram.total()), 4 * kCell);
  s += "\n";
  return s;
}

void EvalConfig::validate() const {
  if (mode != "perception" && mode != "sweeps") throw ConfigError("unknown eval mode '" + mode + "' (perception or sweeps)");
  if (mode == "perception" && logs.empty()) throw ConfigError("perception mode needs at least one --log");
  if (mode == "sweeps" && suite_dir.empty()) throw ConfigError("sweeps mode needs --suite");
  if (out_dir.empty()) throw ConfigError("output directory is empty");
  if (sweep.epochs == 0) throw ConfigError("epochs must be >= 1");
}

namespace {

std::filesystem::path write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + p.string() + "'");
  f << text;
  if (!f.flush()) throw IoError("failed writing '" + p.string() + "'");
  return p;
}

}  // namespace

std::vector<std::filesystem::path> cmd_eval(const EvalConfig& cfg) {
  cfg.validate();
  std::vector<std::filesystem::path> inputs(cfg.logs.begin(), cfg.logs.end());
  for (const auto& p : inputs) {
    if (!std::filesystem::exists(p)) throw IoError("episode log '" + p.string() + "' does not exist");
  }
  const std::filesystem::path out(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  if (cfg.mode == "perception") {
    const PerceptionReport r = evaluate_logs(inputs);
    written.push_back(write_file(out / "perception_report.json", perception_report_json(r).dump(2) + "\n"));
    written.push_back(write_file(out / "perception_report.txt", perception_report_text(r)));
    return written;
  }
  const std::vector<Scenario> suite = load_suite(cfg.suite_dir);
  const SweepTable renewal = run_renewal_sweep(suite, kRenewalRates, cfg.seed, cfg.sweep);
  written.push_back(write_file(out / "renewal_sweep.json", sweep_json(renewal).dump(2) + "\n"));
  written.push_back(write_file(out / "renewal_sweep.txt", sweep_text(renewal)));
  const SweepTable intensity = run_intensity_sweep(suite, kPromptLevels, cfg.seed, cfg.sweep);
  written.push_back(write_file(out / "intensity_sweep.json", sweep_json(intensity).dump(2) + "\n"));
  written.push_back(write_file(out / "intensity_sweep.txt", sweep_text(intensity)));
  return written;
}

}  // namespace sentinel
