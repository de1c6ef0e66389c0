#include "sentinel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "sentinel/episode_log.hpp"

namespace sentinel {

namespace {

HeadsConfig heads_for(const Scenario& sc, HeadsConfig heads) {
  heads.tick_dt_s = sc.dt_s;
  return heads;
}

// A violating actor is reported through the confirmed track nearest to it.
std::vector<std::uint32_t> match_violations(const WorldState& world, const PerceptionProduct& p, double gate_m) {
  std::vector<std::uint32_t> out;
  for (const ActorState& a : world.actors) {
    if (!a.violating) continue;
    const Track* best = nullptr;
    double best_d = gate_m;
    for (const Track& t : p.tracks) {
      const double d = distance(t.position, a.position);
      if (d <= best_d) {
        best = &t;
        best_d = d;
      }
    }
    if (best) out.push_back(best->id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

PerceptionSimulator::PerceptionSimulator(Scenario scenario, PerceptionOptions opts)
    : scenario_(std::move(scenario)),
      opts_(opts),
      ego_id_((scenario_.validate(), scenario_.ego())),
      channel_(scenario_.channel, scenario_.seed, scenario_.dt_s),
      ingest_(scenario_.sensing_agent_ids(), scenario_.dt_s, opts.staleness_s),
      fusion_(heads_for(scenario_, opts.heads)) {
  for (const RsuSpec& r : scenario_.rsus) rsus_.push_back({r.id, r.pose, r.sensor});
}

void PerceptionSimulator::deliver_until(double t, std::vector<ReadySet>& ready) {
  std::size_t n = 0;
  while (n < in_flight_.size() && in_flight_[n].deliver_at_s <= t) ++n;
  for (std::size_t i = 0; i < n; ++i) {
    InFlight& f = in_flight_[i];
    V2XMessage msg;
    try {
      msg = decode_message(f.bytes);
    } catch (const MalformedMessage&) {
      continue;
    } catch (const UnsupportedVersion&) {
      continue;
    }
    for (ReadySet& r : ingest_.ingest(std::move(msg), f.deliver_at_s)) ready.push_back(std::move(r));
  }
  in_flight_.erase(in_flight_.begin(), in_flight_.begin() + static_cast<std::ptrdiff_t>(n));
}

std::vector<FiredProduct> PerceptionSimulator::fuse(std::vector<ReadySet> ready) {
  std::vector<FiredProduct> out;
  for (ReadySet& set : ready) {
    const auto tick = static_cast<std::int64_t>(set.tick);
    auto it = recent_.find(tick);
    if (it == recent_.end()) continue;
    const ActorState* ego = it->second.find(ego_id_);
    FiredProduct fp;
    fp.product = fusion_.run_heads(tick, set.frames, ego->pose());
    fp.product.violations = match_violations(it->second, fp.product, opts_.violation_gate_m);
    if (!opts_.keep_grids) fp.product.fused_grid = BevGrid();
    fp.complete = set.complete;
    fp.fired_at_s = set.fired_at_s;
    out.push_back(std::move(fp));
    recent_.erase(recent_.begin(), std::next(it));
  }
  return out;
}

std::optional<SimStep> PerceptionSimulator::step() {
  if (done_) return std::nullopt;
  WorldState w = world_ ? step_world(*world_, scenario_) : initial_state(scenario_);
  world_ = w;

  SimStep s;
  s.collisions = detect_collisions(w);
  s.ego_pose = w.find(ego_id_)->pose();
  recent_[w.tick] = w;

  const double t = w.time_s;
  auto send = [&](const SensorAgent& agent) {
    SensorFrame frame = sense_frame(w, agent, scenario_.seed, scenario_.static_occluders, opts_.local_grid);
    std::vector<std::uint8_t> bytes = encode_message(frame, t);
    if (opts_.keep_frames) {
      frame.local_grid = BevGrid();
      s.frames.push_back(std::move(frame));
    }
    std::optional<InFlight> f = channel_.transmit(std::move(bytes), agent.id, static_cast<std::uint64_t>(w.tick), t);
    if (!f) return;
    ++send_seq_;
    auto pos = std::upper_bound(in_flight_.begin(), in_flight_.end(), f->deliver_at_s,
                                [](double v, const InFlight& x) { return v < x.deliver_at_s; });
    in_flight_.insert(pos, std::move(*f));
  };
  for (const ActorState& a : w.actors) {
    const ActorSpec* spec = scenario_.find_actor(a.id);
    if (spec && spec->agent) send({a.id, a.pose(), scenario_.vehicle_sensor});
  }
  for (const SensorAgent& r : rsus_) send(r);

  const bool last = w.tick >= scenario_.tick_count() || (opts_.stop_on_collision && !s.collisions.empty());
  const double horizon = last ? std::numeric_limits<double>::infinity() : t + scenario_.dt_s;
  std::vector<ReadySet> ready;
  deliver_until(horizon, ready);
  for (ReadySet& r : ingest_.poll(horizon)) ready.push_back(std::move(r));
  s.fired = fuse(std::move(ready));
  s.world = std::move(w);
  if (last) done_ = true;
  return s;
}

PerceptionTrace simulate_perception(const Scenario& scenario, const PerceptionOptions& opts) {
  PerceptionSimulator sim(scenario, opts);
  PerceptionTrace trace;
  trace.scenario_id = scenario.id;
  trace.seed = scenario.seed;
  trace.dt_s = scenario.dt_s;
  while (auto s = sim.step()) {
    TraceTick tt;
    tt.tick = s->world.tick;
    tt.time_s = s->world.time_s;
    tt.ego_pose = s->ego_pose;
    tt.collisions = std::move(s->collisions);
    tt.frames = std::move(s->frames);
    tt.world = std::move(s->world);
    if (!tt.collisions.empty() && !trace.first_collision_tick) trace.first_collision_tick = tt.tick;
    trace.ticks.push_back(std::move(tt));
    for (FiredProduct& f : s->fired) {
      TraceTick& target = trace.ticks.at(static_cast<std::size_t>(f.product.tick));
      target.complete = f.complete;
      target.fired_at_s = f.fired_at_s;
      target.product = std::move(f.product);
    }
  }
  trace.sent = sim.channel().sent();
  trace.delivered = sim.channel().delivered();
  trace.dropped = sim.channel().dropped();
  trace.discarded_stale = sim.ingest().discarded_stale();
  trace.discarded_late = sim.ingest().discarded_late();
  return trace;
}

EpisodeReasoning run_reasoning(const Scenario& scenario, const PerceptionTrace& trace, const EpisodeSpec& spec,
                               LlmClient& llm, CorpusStore& store, const MissionRubric& rubric) {
  ReasoningSession session(spec.episode_id, spec.reasoning, llm, store, rubric, spec.corpus_tick_offset);
  std::vector<ScriptedQuery> queries = scenario.queries;
  std::stable_sort(queries.begin(), queries.end(),
                   [](const ScriptedQuery& a, const ScriptedQuery& b) { return a.t_s < b.t_s; });
  std::size_t next_query = 0;

  EpisodeReasoning out;
  out.ticks.resize(trace.ticks.size());
  for (std::size_t i = 0; i < trace.ticks.size(); ++i) {
    const TraceTick& tt = trace.ticks[i];
    while (next_query < queries.size() && queries[next_query].t_s <= tt.time_s + 1e-9) {
      session.submit_query(queries[next_query++].text);
    }
    if (!tt.product) continue;
    ReasoningSession::TickResult r = session.on_perception(*tt.product, tt.ego_pose, tt.time_s);
    TickReasoning& tr = out.ticks[i];
    tr.risk = r.risk;
    if (r.error) tr.errors.push_back(*r.error);
    if (r.frame) {
      if (r.frame->alert) out.alerts.push_back(*r.frame->alert);
      tr.frames.push_back(std::move(*r.frame));
    }
  }
  out.frames = session.log();
  out.dialogue = session.dialogue();
  FinalizeConfig fc{spec.finalize_k, spec.episode_id, spec.corpus_tick_offset};
  out.committed = finalize_episode(session.log(), trace.first_collision_tick, store, spec.renewal_rate, fc);
  return out;
}

EvidenceIndex evidence_index(const PerceptionTrace& trace) {
  EvidenceIndex idx;
  for (const TraceTick& t : trace.ticks) {
    if (t.product) idx[t.tick] = evidence_of(*t.product);
  }
  return idx;
}

void RunConfig::validate() const {
  if (scenario_path.empty()) throw ConfigError("no scenario given");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  if (!(renewal_rate >= 0.0 && renewal_rate <= 1.0)) throw ConfigError("renewal rate must lie in [0,1]");
  if (out_dir.empty()) throw ConfigError("output directory is empty");
  if (llm != "mock" && llm.rfind("http", 0) != 0) {
    throw ConfigError("unknown llm '" + llm + "' (expected mock or http:<endpoint>)");
  }
}

RunOutcome cmd_run(const RunConfig& cfg) {
  cfg.validate();
  Scenario sc = load_scenario_file(cfg.scenario_path);
  if (cfg.seed) sc.seed = *cfg.seed;
  std::unique_ptr<LlmClient> llm = make_llm_client(cfg.llm);
  const MissionRubric rubric = cfg.rubric_path ? MissionRubric::from_file(*cfg.rubric_path) : MissionRubric::builtin();

  const std::filesystem::path out_dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());

  CorpusStore store(cfg.corpus_path ? std::filesystem::path(*cfg.corpus_path) : out_dir / "corpus.ndjson");
  // Episodes sharing a corpus continue its clock, so box ids stay unique.
  std::int64_t offset = 0;
  for (const CorpusBox& b : store.snapshot()) offset = std::max(offset, b.created_tick + 1);

  const PerceptionTrace trace = simulate_perception(sc);

  EpisodeSpec spec;
  spec.episode_id = sc.id + "-s" + std::to_string(sc.seed) + "-c" + std::to_string(offset);
  spec.corpus_tick_offset = offset;
  spec.renewal_rate = cfg.renewal_rate;
  spec.reasoning = ReasoningConfig::for_level(cfg.level);
  spec.reasoning.alert.threshold = cfg.threshold;
  const EpisodeReasoning reasoning = run_reasoning(sc, trace, spec, *llm, store, rubric);

  RunOutcome out;
  out.collision_tick = trace.first_collision_tick;
  out.exit_code = trace.first_collision_tick ? 2 : 0;
  out.alerts = reasoning.alerts.size();
  out.committed = reasoning.committed;

  LogHeader header;
  header.scenario_id = sc.id;
  header.seed = sc.seed;
  header.episode_id = spec.episode_id;
  header.threshold = cfg.threshold;
  header.renewal_rate = cfg.renewal_rate;
  header.level = cfg.level;
  header.llm = llm->name();
  out.log_path = out_dir / "episode.ndjson";
  std::ofstream f(out.log_path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write episode log '" + out.log_path.string() + "'");
  f << render_episode_log(header, trace, reasoning, out.exit_code);
  if (!f.flush()) throw IoError("failed writing episode log '" + out.log_path.string() + "'");
  return out;
}

}  // namespace sentinel
