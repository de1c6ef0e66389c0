#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/prompt.hpp"
#include "sentinel/reasoning.hpp"

namespace sentinel {

struct EvidenceRef {
  enum class Kind : std::uint8_t { Track, Collision };
  Kind kind = Kind::Track;
  std::uint32_t a = 0;
  std::uint32_t b = 0;  // collisions only

  std::string str() const;  // "track 3" / "collision 3-5"
  bool operator==(const EvidenceRef&) const = default;
};

/// Parsed model answer.
struct Decision {
  std::vector<std::string> steps;
  std::string final_text;  // without the severity tag
  Severity severity = Severity::Info;
  std::vector<EvidenceRef> evidence;  // cited in the final line, first mention order
};

/// Evidence references named in free text: "track <id>", "collision <a>-<b>".
std::vector<EvidenceRef> extract_evidence(std::string_view text);

/// Parses "STEP 1: ...\n...\nFINAL: [Severity] ...". Steps must be numbered
/// consecutively from 1; lines between steps continue the previous step.
/// FINAL must be the last non-blank line. With `chain_of_thought` at least
/// one step is required. Throws ParseError.
Decision parse_decision(std::string_view text, bool chain_of_thought);

/// Contract shared by the in-process mock and the HTTP client: the rendered
/// prompt goes in as plain text, the plain-text response comes back.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// Throws LlmTimeout or TransportError.
  virtual std::string complete(const std::string& prompt, double timeout_s) = 0;
  virtual std::string name() const = 0;
};

struct MockLlmConfig {
  double delay_s = 0.0;  // simulated latency; above the timeout raises LlmTimeout
};

inline constexpr std::string_view kMockRubricVersion = "mock-rubric-v1";

/// Deterministic rule table standing in for the language model. The reply is
/// a pure function of the prompt text: severity from the risk band (capped at
/// Caution without evidence); answer quality tier drawn from a hash of the
/// prompt against a skill level that grows with the mission-relevant and
/// recent corpus boxes in the prompt.
class MockLlmClient : public LlmClient {
 public:
  explicit MockLlmClient(MockLlmConfig cfg = {}) : cfg_(cfg) {}

  std::string complete(const std::string& prompt, double timeout_s) override;
  std::string name() const override { return std::string(kMockRubricVersion); }

  /// Skill in [0, 0.85] implied by the corpus samples of a prompt.
  static double skill(std::string_view prompt);

 private:
  MockLlmConfig cfg_;
};

/// POSTs the prompt as text/plain to `url` (http://host:port/path).
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(std::string url);

  std::string complete(const std::string& prompt, double timeout_s) override;
  std::string name() const override { return "http:" + url_; }

 private:
  std::string url_;
  std::string host_;  // scheme://host:port
  std::string path_;
};

/// "mock" or "http:<url>". Throws ConfigError.
std::unique_ptr<LlmClient> make_llm_client(const std::string& spec);

inline constexpr double kDefaultLlmTimeout = 10.0;

Decision invoke_llm(LlmClient& client, const PromptBundle& prompt, bool chain_of_thought,
                    double timeout_s = kDefaultLlmTimeout);

}  // namespace sentinel
