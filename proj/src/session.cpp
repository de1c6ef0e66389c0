#include "sentinel/session.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "text_util.hpp"

namespace sentinel {

SafetyAlert emit_alert(const Decision& decision, const QueryJob& job) {
  SafetyAlert a;
  a.mode = job.mode;
  a.mission = job.mission;
  a.severity = decision.severity;
  a.text = decision.final_text;
  a.evidence = decision.evidence;
  a.tick = job.tick;
  if (a.mode == QueryMode::Passive && a.evidence.empty()) {
    a.fallback = true;
    a.text = std::string(kFallbackMarker) + " " + a.text;
  }
  return a;
}

namespace {

Severity severity_for(double risk) {
  if (risk < 0.1) return Severity::Info;
  if (risk < 0.3) return Severity::Caution;
  if (risk < 0.6) return Severity::Warning;
  return Severity::Critical;
}

}  // namespace

SafetyAlert template_alert(const QueryJob& job) {
  SafetyAlert a;
  a.mode = job.mode;
  a.mission = job.mission;
  a.severity = severity_for(job.risk.value);
  a.tick = job.tick;
  a.templated = true;
  const RiskScore& r = job.risk;
  if (r.min_ttc_s && r.ttc_pair) {
    const auto [ta, tb] = *r.ttc_pair;
    a.text = "hazard: TTC " + fixed(*r.min_ttc_s, 1) + "s with track " + std::to_string(ta);
    a.evidence = {{EvidenceRef::Kind::Track, ta, 0},
                  {EvidenceRef::Kind::Track, tb, 0},
                  {EvidenceRef::Kind::Collision, ta, tb}};
  } else if (r.nearest_track) {
    a.text = "hazard: proximity " + fixed(r.nearest_distance_m, 1) + "m with track " + std::to_string(*r.nearest_track);
    a.evidence = {{EvidenceRef::Kind::Track, *r.nearest_track, 0}};
  } else if (!job.scene.violations.empty()) {
    const std::uint32_t v = job.scene.violations.front();
    a.text = "hazard: violation by track " + std::to_string(v);
    a.evidence = {{EvidenceRef::Kind::Track, v, 0}};
  } else {
    a.text = std::string(kFallbackMarker) + " hazard: risk " + fixed(r.value, 2);
    a.fallback = true;
  }
  return a;
}

SafetyAlert resolve_alert(LlmClient& client, const PromptBundle& prompt, const QueryJob& job,
                          const LlmCallConfig& cfg, std::optional<Decision>* decision_out, std::string* failure_out) {
  try {
    Decision d = invoke_llm(client, prompt, cfg.chain_of_thought, cfg.timeout_s);
    SafetyAlert alert = emit_alert(d, job);
    if (decision_out) *decision_out = std::move(d);
    return alert;
  } catch (const LlmTimeout& e) {
    if (job.mode == QueryMode::Active) throw;
    if (failure_out) *failure_out = std::string("timeout: ") + e.what();
  } catch (const TransportError& e) {
    if (job.mode == QueryMode::Active) throw;
    if (failure_out) *failure_out = std::string("transport: ") + e.what();
  } catch (const ParseError& e) {
    if (job.mode == QueryMode::Active) throw;
    if (failure_out) *failure_out = std::string("parse: ") + e.what();
  }
  return template_alert(job);
}

std::optional<SafetyAlert> AlertBus::Subscription::next(int timeout_ms) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms), [&] { return !queue_.empty(); })) return std::nullopt;
  SafetyAlert a = std::move(queue_.front());
  queue_.pop_front();
  return a;
}

std::size_t AlertBus::Subscription::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

std::shared_ptr<AlertBus::Subscription> AlertBus::subscribe() {
  auto sub = std::make_shared<Subscription>();
  std::lock_guard lock(mu_);
  subs_.push_back(sub);
  return sub;
}

void AlertBus::publish(const SafetyAlert& alert) {
  // Holding the bus lock across delivery keeps every subscriber's order equal
  // to publish order.
  std::lock_guard lock(mu_);
  std::erase_if(subs_, [](const std::weak_ptr<Subscription>& w) { return w.expired(); });
  for (const auto& w : subs_) {
    if (auto s = w.lock()) {
      {
        std::lock_guard sl(s->mu_);
        s->queue_.push_back(alert);
      }
      s->cv_.notify_all();
    }
  }
}

std::string_view to_string(PromptLevel l) {
  switch (l) {
    case PromptLevel::Mini:
      return "mini";
    case PromptLevel::Middle:
      return "middle";
    case PromptLevel::High:
      return "high";
  }
  return "middle";
}

PromptLevel prompt_level_from_string(std::string_view s) {
  if (s == "mini") return PromptLevel::Mini;
  if (s == "middle") return PromptLevel::Middle;
  if (s == "high") return PromptLevel::High;
  throw ConfigError("unknown prompt level '" + std::string(s) + "' (expected mini, middle or high)");
}

std::size_t level_budget(PromptLevel l) {
  switch (l) {
    case PromptLevel::Mini:
      return 4000;
    case PromptLevel::Middle:
      return 16000;
    case PromptLevel::High:
      return 48000;
  }
  return kDefaultPromptBudget;
}

std::size_t level_k(PromptLevel l) {
  switch (l) {
    case PromptLevel::Mini:
      return 1;
    case PromptLevel::Middle:
      return 5;
    case PromptLevel::High:
      return 10;
  }
  return 5;
}

ReasoningConfig ReasoningConfig::for_level(PromptLevel level) {
  ReasoningConfig c;
  c.prompt.budget_chars = level_budget(level);
  c.k = level_k(level);
  return c;
}

ReasoningSession::ReasoningSession(std::string episode_id, ReasoningConfig cfg, LlmClient& llm,
                                   const CorpusStore& store, const MissionRubric& rubric,
                                   std::int64_t corpus_tick_offset)
    : episode_id_(std::move(episode_id)),
      cfg_(cfg),
      llm_(llm),
      store_(store),
      rubric_(rubric),
      corpus_tick_offset_(corpus_tick_offset),
      trigger_(cfg.alert) {}

void ReasoningSession::submit_query(std::string text) {
  const bool blank = std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
  if (blank) throw EmptyQuery("active query text is empty");
  queries_.push_back(std::move(text));
}

void ReasoningSession::set_threshold(double value) {
  AlertConfig probe = trigger_.config();
  probe.threshold = value;
  probe.validate();
  pending_threshold_ = value;
}

std::string ReasoningSession::describe_raw(const PerceptionProduct& p) const {
  std::string s = std::to_string(p.detections.size()) + " detections from " +
                  std::to_string(p.contributing_agents.size()) + " agents:";
  std::size_t shown = 0;
  for (const Detection3D& d : p.detections) {
    if (shown++ == 12) {
      s += " ...";
      break;
    }
    s += " " + std::string(to_string(d.cls)) + "@(" + fixed(d.center.x, 1) + "," + fixed(d.center.y, 1) + ")";
  }
  return s;
}

ReasoningSession::TickResult ReasoningSession::on_perception(const PerceptionProduct& product, const Pose2& ego_pose,
                                                             double time_s) {
  if (pending_threshold_) {
    trigger_.set_threshold(*pending_threshold_);
    pending_threshold_.reset();
  }
  const std::string raw_ref = "raw:" + episode_id_ + "#" + std::to_string(product.tick);
  InputBundle bundle = build_input_bundle(episode_id_, &product, time_s, ego_pose, dialogue_, {raw_ref}, cfg_.risk);

  TickResult result;
  result.risk = bundle.risk;

  std::optional<QueryJob> job = trigger_.poll(bundle);
  std::optional<std::string> question;
  if (!job && !queries_.empty()) {
    question = std::move(queries_.front());
    queries_.pop_front();
    job = submit_active_query(bundle, *question, rubric_);
  }

  if (job) {
    job->corpus_tick = corpus_tick_offset_ + job->tick;
    std::vector<ScoredBox> sampled = sample_corpus(store_, *job, cfg_.k, cfg_.sampling);
    PromptBundle prompt = generate_prompt(*job, std::move(sampled), {cache_.begin(), cache_.end()},
                                          {raw_.begin(), raw_.end()}, cfg_.prompt);
    DecisionFrame frame;
    frame.tick = product.tick;
    frame.prompt_digest = prompt.digest;
    frame.prompt_chars = prompt.rendered.size();
    for (const ScoredBox& b : prompt.sampled_boxes) frame.sampled_box_ids.push_back(b.box.box_id);
    frame.risk = bundle.risk;
    try {
      frame.alert = resolve_alert(llm_, prompt, *job, cfg_.llm, &frame.decision, &frame.failure);
    } catch (const Error& e) {
      frame.failure = e.what();
      result.error = e.what();
    }
    if (question) {
      dialogue_.push_back({"driver", *question});
      if (frame.decision) {
        dialogue_.push_back({"assistant", "[" + std::string(to_string(frame.decision->severity)) + "] " +
                                              frame.decision->final_text});
      } else {
        dialogue_.push_back({"assistant", "[error] " + frame.failure});
      }
    }
    frame.job = std::move(*job);
    log_.push_back(frame);
    result.frame = std::move(frame);
  }

  cache_.push_back({product.tick, "risk " + fixed(bundle.risk.value, 3) + ", " +
                                      std::to_string(product.tracks.size()) + " tracks, " +
                                      std::to_string(product.collisions.size()) + " predicted conflicts" +
                                      (result.frame && result.frame->alert
                                           ? ", alert " + std::string(to_string(result.frame->alert->severity))
                                           : std::string())});
  while (cache_.size() > cfg_.cache_len) cache_.pop_front();
  raw_.push_back({product.tick, describe_raw(product)});
  while (raw_.size() > cfg_.raw_len) raw_.pop_front();
  return result;
}

std::string frame_summary(const DecisionFrame& frame) {
  std::string s = "t" + std::to_string(frame.tick) + " " + std::string(to_string(frame.job.mission)) + " " +
                  std::string(to_string(frame.job.mode)) + " risk " + fixed(frame.risk.value, 3);
  if (frame.decision) {
    s += " severity " + std::string(to_string(frame.decision->severity)) + ": " + frame.decision->final_text;
  } else if (frame.alert) {
    s += " severity " + std::string(to_string(frame.alert->severity)) + ": " + frame.alert->text;
  } else {
    s += ": model failure";
  }
  return s;
}

std::vector<CorpusBox> finalize_episode(const std::vector<DecisionFrame>& log,
                                        std::optional<std::int64_t> collision_tick, CorpusStore& store,
                                        double renewal_rate, const FinalizeConfig& cfg) {
  if (!(renewal_rate >= 0.0 && renewal_rate <= 1.0)) throw ValidationError("renewal rate must lie in [0,1]");

  auto make_box = [&](const DecisionFrame* f, std::int64_t tick, Outcome outcome) {
    CorpusBox b;
    b.box_id = cfg.episode_id + "/t" + std::to_string(tick) + (outcome == Outcome::Failure ? "/failure" : "");
    b.created_tick = cfg.corpus_tick_offset + tick;
    b.outcome = outcome;
    b.payload_ref = cfg.episode_id + "#tick" + std::to_string(tick);
    if (f) {
      b.mission = f->job.mission;
      b.tags = f->job.tags;
      b.summary_text = frame_summary(*f);
    } else {
      b.mission = Mission::AccidentPrediction;
      b.tags = {"hazard:collision", "mission:AccidentPrediction"};
      b.summary_text = "t" + std::to_string(tick) + " collision without a decision frame";
    }
    if (outcome == Outcome::Failure) {
      b.summary_text = "failure, collision at t" + std::to_string(tick) + ". " + b.summary_text;
      if (std::find(b.tags.begin(), b.tags.end(), "hazard:collision") == b.tags.end()) {
        b.tags.push_back("hazard:collision");
        std::sort(b.tags.begin(), b.tags.end());
      }
    }
    return b;
  };

  std::vector<CorpusBox> candidates;
  if (collision_tick) {
    const DecisionFrame* nearest = nullptr;
    for (const DecisionFrame& f : log) {
      if (!nearest || std::llabs(f.tick - *collision_tick) < std::llabs(nearest->tick - *collision_tick)) nearest = &f;
    }
    candidates.push_back(make_box(nearest, nearest ? nearest->tick : *collision_tick, Outcome::Failure));
  } else {
    std::vector<std::size_t> order(log.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (log[a].risk.value != log[b].risk.value) return log[a].risk.value > log[b].risk.value;
      return log[a].tick < log[b].tick;
    });
    for (std::size_t i = 0; i < order.size() && i < cfg.k; ++i) {
      const DecisionFrame& f = log[order[i]];
      candidates.push_back(make_box(&f, f.tick, f.decision ? Outcome::Success : Outcome::Neutral));
    }
  }

  const auto n = static_cast<std::size_t>(std::ceil(renewal_rate * static_cast<double>(candidates.size()) - 1e-12));
  candidates.resize(std::min(n, candidates.size()));
  for (const CorpusBox& b : candidates) store.append(b);
  return candidates;
}

}  // namespace sentinel
