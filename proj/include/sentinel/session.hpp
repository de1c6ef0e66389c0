#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/corpus.hpp"
#include "sentinel/llm.hpp"
#include "sentinel/prompt.hpp"
#include "sentinel/reasoning.hpp"

namespace sentinel {

inline constexpr std::string_view kFallbackMarker = "[fallback: no evidence]";

struct SafetyAlert {
  QueryMode mode = QueryMode::Passive;
  Mission mission = Mission::TrafficSituation;
  Severity severity = Severity::Info;
  std::string text;
  std::vector<EvidenceRef> evidence;
  std::int64_t tick = 0;
  bool fallback = false;   // carries the explicit fallback marker instead of evidence
  bool templated = false;  // built from the risk components after an LLM failure
};

/// Per-tick record of one reasoning round.
struct DecisionFrame {
  std::int64_t tick = 0;
  QueryJob job;
  std::string prompt_digest;
  std::size_t prompt_chars = 0;
  std::vector<std::string> sampled_box_ids;
  std::optional<Decision> decision;  // empty when the model failed
  std::string failure;               // error text when it did
  RiskScore risk{};
  std::optional<SafetyAlert> alert;
};

/// Alert from a parsed decision; severity passes through. A passive alert
/// without evidence gets the fallback marker.
SafetyAlert emit_alert(const Decision& decision, const QueryJob& job);

/// Template alert from the risk components, used when the model fails on a
/// passive job: "hazard: TTC {x}s with track {id}".
SafetyAlert template_alert(const QueryJob& job);

struct LlmCallConfig {
  bool chain_of_thought = true;
  double timeout_s = kDefaultLlmTimeout;
};

/// Invokes the model and turns its answer into an alert. Passive jobs absorb
/// LlmTimeout, TransportError and ParseError into a template alert; active
/// jobs rethrow them. `decision_out` receives the parsed decision when there
/// is one.
SafetyAlert resolve_alert(LlmClient& client, const PromptBundle& prompt, const QueryJob& job,
                          const LlmCallConfig& cfg, std::optional<Decision>* decision_out = nullptr,
                          std::string* failure_out = nullptr);

/// Ordered broadcast of alerts. Each subscriber receives every alert
/// published after it subscribed, in publish order.
class AlertBus {
 public:
  class Subscription {
   public:
    /// Waits up to `timeout_ms` for the next alert.
    std::optional<SafetyAlert> next(int timeout_ms);
    std::size_t pending() const;

   private:
    friend class AlertBus;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<SafetyAlert> queue_;
  };

  std::shared_ptr<Subscription> subscribe();
  void publish(const SafetyAlert& alert);

 private:
  std::mutex mu_;
  std::vector<std::weak_ptr<Subscription>> subs_;
};

enum class PromptLevel : std::uint8_t { Mini, Middle, High };
std::string_view to_string(PromptLevel l);
PromptLevel prompt_level_from_string(std::string_view s);  // ConfigError
std::size_t level_budget(PromptLevel l);                   // 4000 / 16000 / 48000
std::size_t level_k(PromptLevel l);                        // 1 / 5 / 10

struct ReasoningConfig {
  AlertConfig alert{};
  RiskConfig risk{};
  SamplingConfig sampling{};
  PromptConfig prompt{};
  std::size_t k = 5;
  LlmCallConfig llm{};
  std::size_t cache_len = 8;
  std::size_t raw_len = 4;

  static ReasoningConfig for_level(PromptLevel level);
};

/// One reasoning loop for one episode, strictly serialised per tick. At most
/// one DecisionFrame per tick: a passive job takes the tick and a pending
/// active query waits for the next one.
class ReasoningSession {
 public:
  ReasoningSession(std::string episode_id, ReasoningConfig cfg, LlmClient& llm, const CorpusStore& store,
                   const MissionRubric& rubric, std::int64_t corpus_tick_offset = 0);

  /// Queues a driver query for the next processed tick. Throws EmptyQuery.
  void submit_query(std::string text);
  /// Takes effect from the next processed tick. Throws ConfigError.
  void set_threshold(double value);
  double threshold() const { return pending_threshold_.value_or(trigger_.config().threshold); }

  struct TickResult {
    RiskScore risk{};
    std::optional<DecisionFrame> frame;
    std::optional<std::string> error;  // active-query failure surfaced to the caller
  };

  TickResult on_perception(const PerceptionProduct& product, const Pose2& ego_pose, double time_s);

  const std::vector<DecisionFrame>& log() const { return log_; }
  const std::vector<DialogueTurn>& dialogue() const { return dialogue_; }
  const std::string& episode_id() const { return episode_id_; }
  std::size_t pending_queries() const { return queries_.size(); }

 private:
  std::string describe_raw(const PerceptionProduct& p) const;

  std::string episode_id_;
  ReasoningConfig cfg_;
  LlmClient& llm_;
  const CorpusStore& store_;
  const MissionRubric& rubric_;
  std::int64_t corpus_tick_offset_;
  PassiveTrigger trigger_;
  std::optional<double> pending_threshold_;
  std::deque<std::string> queries_;
  std::vector<DialogueTurn> dialogue_;
  std::deque<CacheEntry> cache_;
  std::deque<RawRecord> raw_;
  std::vector<DecisionFrame> log_;
};

struct FinalizeConfig {
  std::size_t k = 2;  // candidate frames of a clean episode
  std::string episode_id;
  std::int64_t corpus_tick_offset = 0;
};

/// Deterministic summary of a decision frame used as box text.
std::string frame_summary(const DecisionFrame& frame);

/// Corpus update after an episode. Clean: the top-k frames by risk (earlier
/// frame on ties) are candidates. Collision: one failure box for the frame
/// nearest the collision tick. Of the candidates the ceil(rho * count)
/// highest-risk ones are committed. Returns the committed boxes.
std::vector<CorpusBox> finalize_episode(const std::vector<DecisionFrame>& log,
                                        std::optional<std::int64_t> collision_tick, CorpusStore& store,
                                        double renewal_rate, const FinalizeConfig& cfg);

}  // namespace sentinel
