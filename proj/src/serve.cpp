#include "sentinel/serve.hpp"

#include <algorithm>
#include <chrono>
#include <map>

#include "httplib.h"

namespace sentinel {

namespace {

constexpr std::size_t kAlertTail = 10;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req, httplib::Response& res) {
  try {
    json j = json::parse(req.body);
    if (j.is_object()) return j;
  } catch (const json::exception&) {
  }
  reply(res, 400, {{"error", "body must be a JSON object"}});
  return nullptr;
}

}  // namespace

SessionHost::SessionHost(ServeConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.run.validate();
  if (cfg_.port < 0 || cfg_.port > 65535) throw ConfigError("port must lie in [0, 65535]");
  if (cfg_.tick_ms < 0) throw ConfigError("tick pacing must be >= 0 ms");
  scenario_ = load_scenario_file(cfg_.run.scenario_path);
  if (cfg_.run.seed) scenario_.seed = *cfg_.run.seed;
  state_ = std::make_shared<const json>(json{{"tick", nullptr},
                                             {"time_s", nullptr},
                                             {"perception_tick", nullptr},
                                             {"risk", nullptr},
                                             {"threshold", cfg_.run.threshold},
                                             {"alerts_tail", json::array()},
                                             {"pending_queries", 0},
                                             {"finished", false},
                                             {"collision_tick", nullptr}});
  report_ = std::make_shared<const json>(json{{"finished", false}});
  server_ = std::make_unique<httplib::Server>();
  routes();
}

SessionHost::~SessionHost() { stop(); }

int SessionHost::start() {
  int port = cfg_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(cfg_.host);
    if (port < 0) throw BindError("cannot bind any port on " + cfg_.host);
  } else if (!server_->bind_to_port(cfg_.host, port)) {
    throw BindError("cannot bind " + cfg_.host + ":" + std::to_string(port));
  }
  http_thread_ = std::thread([this] { server_->listen_after_bind(); });
  loop_thread_ = std::thread([this] { loop(); });
  server_->wait_until_ready();
  return port;
}

void SessionHost::wait() {
  if (http_thread_.joinable()) http_thread_.join();
}

void SessionHost::stop() {
  stopping_ = true;
  events_cv_.notify_all();
  if (server_) server_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  if (loop_thread_.joinable()) loop_thread_.join();
}

json SessionHost::state() const {
  std::lock_guard lock(snap_mu_);
  return *state_;
}

json SessionHost::report() const {
  std::lock_guard lock(snap_mu_);
  return *report_;
}

void SessionHost::apply_commands(ReasoningSession& session) {
  std::deque<Command> cmds;
  {
    std::lock_guard lock(cmd_mu_);
    cmds.swap(commands_);
  }
  for (Command& c : cmds) {
    try {
      if (auto* q = std::get_if<Query>(&c)) {
        session.submit_query(std::move(q->text));
      } else {
        session.set_threshold(std::get<Threshold>(c).value);
      }
    } catch (const Error&) {
      // Handlers validate before queueing; nothing reaches here in practice.
    }
  }
}

void SessionHost::loop() {
  PerceptionSimulator sim(scenario_);
  std::unique_ptr<LlmClient> llm = make_llm_client(cfg_.run.llm);
  const MissionRubric rubric =
      cfg_.run.rubric_path ? MissionRubric::from_file(*cfg_.run.rubric_path) : MissionRubric::builtin();
  auto store = cfg_.run.corpus_path ? std::make_unique<CorpusStore>(*cfg_.run.corpus_path) : std::make_unique<CorpusStore>();
  std::int64_t offset = 0;
  for (const CorpusBox& b : store->snapshot()) offset = std::max(offset, b.created_tick + 1);
  const std::string episode_id =
      scenario_.id + "-s" + std::to_string(scenario_.seed) + "-c" + std::to_string(offset) + "-live";
  ReasoningConfig rc = ReasoningConfig::for_level(cfg_.run.level);
  rc.alert.threshold = cfg_.run.threshold;
  ReasoningSession session(episode_id, rc, *llm, *store, rubric, offset);

  std::map<std::int64_t, TraceTick> pending;  // world ticks whose product has not fired yet
  std::optional<std::int64_t> collision_tick;
  std::int64_t world_tick = -1;
  double world_time = 0.0;
  json last_risk = nullptr;
  std::optional<std::int64_t> perception_tick;
  std::vector<SafetyAlert> alerts;

  auto snapshot = [&](bool done) {
    json tail = json::array();
    for (std::size_t i = alerts.size() > kAlertTail ? alerts.size() - kAlertTail : 0; i < alerts.size(); ++i) {
      tail.push_back(alert_json(alerts[i]));
    }
    auto st = std::make_shared<const json>(json{{"tick", world_tick},
                                                {"time_s", world_time},
                                                {"perception_tick", perception_tick ? json(*perception_tick) : json(nullptr)},
                                                {"risk", last_risk},
                                                {"threshold", session.threshold()},
                                                {"alerts_tail", tail},
                                                {"pending_queries", session.pending_queries()},
                                                {"finished", done},
                                                {"collision_tick", collision_tick ? json(*collision_tick) : json(nullptr)}});
    std::lock_guard lock(snap_mu_);
    state_ = std::move(st);
  };

  auto build_report = [&](bool done, const std::vector<CorpusBox>& committed) {
    json missions = json::object();
    for (Mission m : kAllMissions) missions[std::string(to_string(m))] = {{"alerts", 0}, {"last", nullptr}};
    json all = json::array();
    for (const SafetyAlert& a : alerts) {
      json& m = missions[std::string(to_string(a.mission))];
      m["alerts"] = m["alerts"].get<int>() + 1;
      m["last"] = a.text;
      all.push_back(alert_json(a));
    }
    json dialogue = json::array();
    for (const DialogueTurn& t : session.dialogue()) dialogue.push_back({{"speaker", t.speaker}, {"text", t.text}});
    json boxes = json::array();
    for (const CorpusBox& b : committed) boxes.push_back(json::parse(box_to_json_line(b)));
    auto rep = std::make_shared<const json>(json{{"episode_id", episode_id},
                                                 {"scenario_id", scenario_.id},
                                                 {"finished", done},
                                                 {"ticks", world_tick + 1},
                                                 {"collision_tick", collision_tick ? json(*collision_tick) : json(nullptr)},
                                                 {"decision_frames", session.log().size()},
                                                 {"missions", missions},
                                                 {"alerts", all},
                                                 {"dialogue", dialogue},
                                                 {"corpus_deltas", boxes}});
    std::lock_guard lock(snap_mu_);
    report_ = std::move(rep);
  };

  const auto pace = std::chrono::milliseconds(cfg_.tick_ms);
  auto next = std::chrono::steady_clock::now();
  while (!stopping_) {
    apply_commands(session);
    std::optional<SimStep> s = sim.step();
    if (!s) break;
    world_tick = s->world.tick;
    world_time = s->world.time_s;
    if (!s->collisions.empty() && !collision_tick) collision_tick = world_tick;
    TraceTick tt;
    tt.tick = s->world.tick;
    tt.time_s = s->world.time_s;
    tt.ego_pose = s->ego_pose;
    tt.collisions = std::move(s->collisions);
    tt.world = std::move(s->world);
    pending[tt.tick] = std::move(tt);

    for (FiredProduct& f : s->fired) {
      auto it = pending.find(f.product.tick);
      if (it == pending.end()) continue;
      TraceTick cur = std::move(it->second);
      pending.erase(pending.begin(), std::next(it));
      cur.complete = f.complete;
      cur.fired_at_s = f.fired_at_s;
      cur.product = std::move(f.product);
      TickReasoning tr;
      ReasoningSession::TickResult r = session.on_perception(*cur.product, cur.ego_pose, cur.time_s);
      tr.risk = r.risk;
      if (r.error) tr.errors.push_back(*r.error);
      if (r.frame) {
        if (r.frame->alert) alerts.push_back(*r.frame->alert);
        tr.frames.push_back(std::move(*r.frame));
      }
      const json record = tick_record(cur, tr);
      last_risk = risk_json(r.risk);
      perception_tick = cur.tick;
      auto bev = std::make_shared<const json>(json{{"tick", cur.tick}, {"grid", grid_json(cur.product->fused_grid)}});
      std::vector<StreamEvent> evs = stream_events(record);
      {
        std::lock_guard lock(snap_mu_);
        bev_ = std::move(bev);
        for (StreamEvent& e : evs) events_.push_back(std::move(e));
      }
    }
    snapshot(false);
    build_report(false, {});
    events_cv_.notify_all();
    if (cfg_.tick_ms > 0) {
      next += pace;
      // Short slices so stop() never waits out a long tick.
      while (!stopping_ && std::chrono::steady_clock::now() < next) {
        std::this_thread::sleep_until(std::min(next, std::chrono::steady_clock::now() + std::chrono::milliseconds(10)));
      }
    }
  }

  std::vector<CorpusBox> committed;
  if (!stopping_) {
    committed = finalize_episode(session.log(), collision_tick, *store, cfg_.run.renewal_rate,
                                 FinalizeConfig{2, episode_id, offset});
  }
  build_report(true, committed);
  finished_ = true;
  snapshot(true);
  events_cv_.notify_all();
  // Keep acknowledging threshold changes after the episode ends.
  while (!stopping_) {
    bool changed = false;
    {
      std::lock_guard lock(cmd_mu_);
      changed = !commands_.empty();
    }
    if (changed) {
      apply_commands(session);
      snapshot(true);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
}

void SessionHost::routes() {
  httplib::Server& s = *server_;

  s.Get("/v1/state", [this](const httplib::Request&, httplib::Response& res) { reply(res, 200, state()); });

  s.Get("/v1/report", [this](const httplib::Request&, httplib::Response& res) { reply(res, 200, report()); });

  s.Get("/v1/bev", [this](const httplib::Request&, httplib::Response& res) {
    std::shared_ptr<const json> bev;
    {
      std::lock_guard lock(snap_mu_);
      bev = bev_;
    }
    if (!bev) return reply(res, 404, {{"error", "no fused grid yet"}});
    reply(res, 200, *bev);
  });

  s.Post("/v1/query", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req, res);
    if (body.is_null()) return;
    const auto it = body.find("text");
    if (it == body.end() || !it->is_string()) return reply(res, 400, {{"error", "text must be a string"}});
    const std::string text = it->get<std::string>();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return reply(res, 400, {{"error", "query text is empty"}});
    if (finished_) return reply(res, 409, {{"error", "episode has finished"}});
    {
      std::lock_guard lock(cmd_mu_);
      commands_.push_back(Query{text});
    }
    reply(res, 202, {{"queued", true}, {"text", text}});
  });

  s.Post("/v1/threshold", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req, res);
    if (body.is_null()) return;
    const auto it = body.find("value");
    if (it == body.end() || !it->is_number()) return reply(res, 400, {{"error", "value must be a number"}});
    const double v = it->get<double>();
    if (!(v >= 0.0 && v <= 1.0)) return reply(res, 400, {{"error", "threshold must lie in [0,1]"}});
    {
      std::lock_guard lock(cmd_mu_);
      commands_.push_back(Threshold{v});
    }
    reply(res, 200, {{"threshold", v}, {"applies", "next tick"}});
  });

  s.Get("/v1/stream", [this](const httplib::Request& req, httplib::Response& res) {
    std::int64_t from = 0;
    if (req.has_param("from")) {
      try {
        from = std::stoll(req.get_param_value("from"));
      } catch (const std::exception&) {
        return reply(res, 400, {{"error", "from must be an integer tick"}});
      }
    }
    auto cursor = std::make_shared<std::size_t>(0);
    auto started = std::make_shared<bool>(false);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, from, cursor, started](std::size_t,
                                                                                       httplib::DataSink& sink) {
      std::vector<std::string> out;
      bool done = false;
      {
        std::unique_lock lock(snap_mu_);
        if (!*started) {
          while (*cursor < events_.size() && events_[*cursor].tick < from) ++*cursor;
          *started = true;
        }
        events_cv_.wait_for(lock, std::chrono::milliseconds(200),
                            [&] { return stopping_ || finished_ || *cursor < events_.size(); });
        for (; *cursor < events_.size(); ++*cursor) out.push_back(events_[*cursor].sse());
        done = stopping_ || (finished_ && *cursor == events_.size());
      }
      for (const std::string& e : out) {
        if (!sink.write(e.data(), e.size())) return false;
      }
      if (done) {
        const std::string end = "event: end\ndata: {}\n\n";
        sink.write(end.data(), end.size());
        sink.done();
      }
      return true;
    });
  });
}

int cmd_serve(const ServeConfig& cfg) {
  SessionHost host(cfg);
  const int port = host.start();
  std::printf("serving %s on http://%s:%d\n", cfg.run.scenario_path.c_str(), cfg.host.c_str(), port);
  std::fflush(stdout);
  host.wait();
  return 0;
}

}  // namespace sentinel
