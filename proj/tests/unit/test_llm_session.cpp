#include <gtest/gtest.h>

#include <thread>

#include "sentinel/session.hpp"
#include "test_util.hpp"

using namespace sentinel;

namespace {

QueryJob job_with_risk(double risk, QueryMode mode = QueryMode::Passive) {
  QueryJob j;
  j.mode = mode;
  j.mission = Mission::AccidentPrediction;
  j.text = "Assess the current hazard and warn the driver.";
  j.tick = 12;
  j.risk.value = risk;
  j.risk.ttc_term = risk;
  return j;
}

class ScriptedLlm : public LlmClient {
 public:
  explicit ScriptedLlm(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const std::string&, double) override { return reply_; }
  std::string name() const override { return "scripted"; }

 private:
  std::string reply_;
};

DecisionFrame frame_at(std::int64_t tick, double risk) {
  DecisionFrame f;
  f.tick = tick;
  f.job = job_with_risk(risk);
  f.job.tick = tick;
  f.job.tags = {"mission:AccidentPrediction", "mode:passive"};
  f.risk = f.job.risk;
  f.prompt_digest = "d" + std::to_string(tick);
  return f;
}

PerceptionProduct product_at(std::int64_t tick, double gap) {
  PerceptionProduct p;
  p.tick = tick;
  Track t;
  t.id = 4;
  t.position = {gap, 0};
  t.velocity = {-5, 0};
  p.tracks = {t};
  Detection3D d;
  d.center = t.position;
  d.track_id = 4;
  p.detections = {d};
  if (gap < 25) p.collisions = {{1, 4, gap / 10.0, {gap / 2, 0}}};
  return p;
}

}  // namespace

TEST(ParseDecision, WellFormed) {
  const Decision d = parse_decision("STEP 1: look\ncontinued\nSTEP 2: think\nFINAL: [Warning] track 3 brakes; collision 3-5 ahead\n",
                                    true);
  ASSERT_EQ(d.steps.size(), 2u);
  EXPECT_EQ(d.steps[0], "look continued");
  EXPECT_EQ(d.severity, Severity::Warning);
  ASSERT_EQ(d.evidence.size(), 2u);
  EXPECT_EQ(d.evidence[0].str(), "track 3");
  EXPECT_EQ(d.evidence[1].str(), "collision 3-5");
}

TEST(ParseDecision, Errors) {
  EXPECT_THROW(parse_decision("STEP 1: only steps\n", true), ParseError);
  EXPECT_THROW(parse_decision("FINAL: [Info] ok\n", true), ParseError);
  EXPECT_NO_THROW(parse_decision("FINAL: [Info] ok\n", false));
  EXPECT_THROW(parse_decision("STEP 2: skipped\nFINAL: [Info] ok\n", true), ParseError);
  EXPECT_THROW(parse_decision("STEP 1: a\nFINAL: [Dire] ok\n", true), ParseError);
  EXPECT_THROW(parse_decision("STEP 1: a\nFINAL: [Info] ok\nSTEP 2: late\n", true), ParseError);
}

TEST(MockLlm, SeverityFollowsRiskBand) {
  MockLlmClient llm;
  const QueryJob job = job_with_risk(0.25);
  const PromptBundle p = generate_prompt(job, {}, {}, {});
  const Decision d = invoke_llm(llm, p, true);
  EXPECT_EQ(d.severity, Severity::Caution);
  EXPECT_FALSE(d.steps.empty());
  EXPECT_EQ(llm.complete(p.rendered, 1.0), llm.complete(p.rendered, 1.0));
}

TEST(MockLlm, DelayBeyondTimeout) {
  MockLlmClient slow(MockLlmConfig{2.0});
  EXPECT_THROW(slow.complete("x", 1.0), LlmTimeout);
}

TEST(MockLlm, SkillGrowsWithRelevantBoxes) {
  const QueryJob job = job_with_risk(0.5);
  std::vector<ScoredBox> boxes;
  double last = MockLlmClient::skill(generate_prompt(job, {}, {}, {}).rendered);
  for (int i = 0; i < 6; ++i) {
    CorpusBox b;
    b.box_id = "b" + std::to_string(i);
    b.mission = Mission::AccidentPrediction;
    b.summary_text = "prior";
    boxes.push_back({b, 0.9});
    const double s = MockLlmClient::skill(generate_prompt(job, boxes, {}, {}).rendered);
    EXPECT_GE(s, last);
    EXPECT_LE(s, 0.85);
    last = s;
  }
  EXPECT_GT(last, 0.05);
}

TEST(MakeClient, Specs) {
  EXPECT_EQ(make_llm_client("mock")->name(), kMockRubricVersion);
  EXPECT_THROW(make_llm_client("gpt"), ConfigError);
}

TEST(Alerts, PassiveFailureBecomesTemplate) {
  MockLlmClient slow(MockLlmConfig{5.0});
  QueryJob job = job_with_risk(0.5);
  job.risk.min_ttc_s = 2.04;
  job.risk.ttc_pair = std::make_pair(3u, 9u);
  const PromptBundle p = generate_prompt(job, {}, {}, {});
  std::string failure;
  const SafetyAlert a = resolve_alert(slow, p, job, LlmCallConfig{true, 1.0}, nullptr, &failure);
  EXPECT_TRUE(a.templated);
  EXPECT_EQ(a.text, "hazard: TTC 2.0s with track 3");
  EXPECT_EQ(a.severity, Severity::Warning);
  EXPECT_NE(failure.find("timeout"), std::string::npos);

  ScriptedLlm garbage("no final line here");
  EXPECT_TRUE(resolve_alert(garbage, p, job, LlmCallConfig{}).templated);
}

TEST(Alerts, ActiveFailureRethrows) {
  MockLlmClient slow(MockLlmConfig{5.0});
  const QueryJob job = job_with_risk(0.5, QueryMode::Active);
  const PromptBundle p = generate_prompt(job, {}, {}, {});
  EXPECT_THROW(resolve_alert(slow, p, job, LlmCallConfig{true, 1.0}), LlmTimeout);
  ScriptedLlm garbage("STEP 1: x\n");
  EXPECT_THROW(resolve_alert(garbage, p, job, LlmCallConfig{}), ParseError);
}

TEST(Alerts, SeverityPassesThroughAndFallbackMarks) {
  ScriptedLlm crit("STEP 1: x\nFINAL: [Critical] brake for collision 1-4\n");
  const QueryJob job = job_with_risk(0.05);
  std::optional<Decision> d;
  const SafetyAlert a = resolve_alert(crit, generate_prompt(job, {}, {}, {}), job, LlmCallConfig{}, &d);
  EXPECT_EQ(a.severity, Severity::Critical);
  EXPECT_FALSE(a.fallback);
  ASSERT_TRUE(d);

  ScriptedLlm vague("STEP 1: x\nFINAL: [Info] all fine\n");
  const SafetyAlert b = resolve_alert(vague, generate_prompt(job, {}, {}, {}), job, LlmCallConfig{});
  EXPECT_TRUE(b.fallback);
  EXPECT_EQ(b.text.rfind(kFallbackMarker, 0), 0u);
}

TEST(AlertBus, OrderedBroadcast) {
  AlertBus bus;
  auto s1 = bus.subscribe();
  SafetyAlert a;
  a.tick = 1;
  bus.publish(a);
  auto s2 = bus.subscribe();
  for (std::int64_t t = 2; t <= 4; ++t) {
    a.tick = t;
    bus.publish(a);
  }
  EXPECT_EQ(s1->pending(), 4u);
  EXPECT_EQ(s2->pending(), 3u);
  for (std::int64_t t = 1; t <= 4; ++t) EXPECT_EQ(s1->next(10)->tick, t);
  EXPECT_EQ(s2->next(10)->tick, 2);
  EXPECT_FALSE(s1->next(1));
}

TEST(Levels, BudgetsAndK) {
  EXPECT_EQ(level_budget(PromptLevel::Mini), 4000u);
  EXPECT_EQ(level_budget(PromptLevel::Middle), 16000u);
  EXPECT_EQ(level_budget(PromptLevel::High), 48000u);
  EXPECT_EQ(level_k(PromptLevel::Mini), 1u);
  EXPECT_EQ(level_k(PromptLevel::High), 10u);
  EXPECT_EQ(prompt_level_from_string("high"), PromptLevel::High);
  EXPECT_THROW(prompt_level_from_string("huge"), ConfigError);
}

TEST(Session, PassiveAndActiveShareTicks) {
  MockLlmClient llm;
  CorpusStore store;
  const MissionRubric rubric = MissionRubric::builtin();
  ReasoningSession s("ep", ReasoningConfig{}, llm, store, rubric);
  EXPECT_THROW(s.submit_query("   "), EmptyQuery);
  s.submit_query("Is it safe to go?");
  const auto r0 = s.on_perception(product_at(0, 15.0), {}, 0.0);  // risk high: passive takes the tick
  ASSERT_TRUE(r0.frame);
  EXPECT_EQ(r0.frame->job.mode, QueryMode::Passive);
  EXPECT_EQ(s.pending_queries(), 1u);
  const auto r1 = s.on_perception(product_at(1, 14.5), {}, 0.1);
  ASSERT_TRUE(r1.frame);
  EXPECT_EQ(r1.frame->job.mode, QueryMode::Active);
  EXPECT_EQ(r1.frame->job.mission, Mission::SafetyEvaluation);
  EXPECT_EQ(s.pending_queries(), 0u);
  EXPECT_EQ(s.log().size(), 2u);
}

TEST(Session, ThresholdAppliesFromNextTick) {
  MockLlmClient llm;
  CorpusStore store;
  const MissionRubric rubric = MissionRubric::builtin();
  ReasoningSession s("ep", ReasoningConfig{}, llm, store, rubric);
  s.set_threshold(1.0);
  EXPECT_EQ(s.threshold(), 1.0);
  EXPECT_FALSE(s.on_perception(product_at(0, 15.0), {}, 0.0).frame);
  EXPECT_THROW(s.set_threshold(2.0), ConfigError);
  s.set_threshold(0.0);
  EXPECT_TRUE(s.on_perception(product_at(1, 40.0), {}, 0.1).frame);
}

TEST(Session, ActiveFailureSurfaces) {
  MockLlmClient slow(MockLlmConfig{20.0});
  CorpusStore store;
  const MissionRubric rubric = MissionRubric::builtin();
  ReasoningConfig cfg;
  cfg.alert.threshold = 1.0;
  ReasoningSession s("ep", cfg, slow, store, rubric);
  s.submit_query("who is at fault");
  const auto r = s.on_perception(product_at(0, 40.0), {}, 0.0);
  ASSERT_TRUE(r.error);
}

TEST(Session, DeterministicLoop) {
  auto run = [] {
    MockLlmClient llm;
    CorpusStore store;
    const MissionRubric rubric = MissionRubric::builtin();
    ReasoningSession s("ep", ReasoningConfig{}, llm, store, rubric);
    std::vector<std::string> digests;
    for (int t = 0; t < 80; ++t) {
      if (t == 30) s.submit_query("why did the car stop");
      const auto r = s.on_perception(product_at(t, 40.0 - 0.5 * t), {}, 0.1 * t);
      if (r.frame) digests.push_back(r.frame->prompt_digest + "|" + (r.frame->alert ? r.frame->alert->text : ""));
    }
    return digests;
  };
  const auto a = run();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, run());
}

TEST(Finalize, CleanEpisodeTopK) {
  const std::vector<DecisionFrame> log = {frame_at(10, 0.1), frame_at(20, 0.8), frame_at(30, 0.3), frame_at(40, 0.9)};
  CorpusStore store;
  const auto boxes = finalize_episode(log, std::nullopt, store, 1.0, FinalizeConfig{2, "ep", 0});
  ASSERT_EQ(boxes.size(), 2u);
  EXPECT_EQ(boxes[0].box_id, "ep/t40");
  EXPECT_EQ(boxes[1].box_id, "ep/t20");
  EXPECT_EQ(boxes[0].payload_ref, "ep#tick40");
  EXPECT_EQ(store.size(), 2u);

  CorpusStore half;
  EXPECT_EQ(finalize_episode(log, std::nullopt, half, 0.5, FinalizeConfig{2, "ep", 0}).size(), 1u);
  EXPECT_TRUE(half.contains("ep/t40"));
}

TEST(Finalize, CollisionGivesOneFailureBox) {
  const std::vector<DecisionFrame> log = {frame_at(50, 0.4), frame_at(55, 0.5), frame_at(60, 0.9)};
  CorpusStore store;
  const auto boxes = finalize_episode(log, 57, store, 1.0, FinalizeConfig{2, "ep", 1000});
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_EQ(boxes[0].box_id, "ep/t55/failure");
  EXPECT_EQ(boxes[0].outcome, Outcome::Failure);
  EXPECT_EQ(boxes[0].created_tick, 1055);
  EXPECT_NE(std::find(boxes[0].tags.begin(), boxes[0].tags.end(), "hazard:collision"), boxes[0].tags.end());
}

TEST(Finalize, ZeroRateLeavesStoreUntouched) {
  const auto dir = testutil::temp_dir("finalize_zero");
  const auto path = dir / "corpus.ndjson";
  {
    CorpusStore seed(path);
    CorpusBox b;
    b.box_id = "seed";
    b.summary_text = "seed box";
    seed.append(b);
  }
  const std::string before = testutil::slurp(path);
  CorpusStore store(path);
  const std::vector<DecisionFrame> log = {frame_at(10, 0.7)};
  EXPECT_TRUE(finalize_episode(log, std::nullopt, store, 0.0, FinalizeConfig{2, "ep", 0}).empty());
  EXPECT_TRUE(finalize_episode(log, 12, store, 0.0, FinalizeConfig{2, "ep", 0}).empty());
  EXPECT_EQ(testutil::slurp(path), before);
  EXPECT_THROW(finalize_episode(log, std::nullopt, store, 1.5, FinalizeConfig{}), ValidationError);
}
