#include "sentinel/llm.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "text_util.hpp"

namespace sentinel {

std::string EvidenceRef::str() const {
  if (kind == Kind::Track) return "track " + std::to_string(a);
  return "collision " + std::to_string(a) + "-" + std::to_string(b);
}

std::vector<EvidenceRef> extract_evidence(std::string_view text) {
  static const std::regex pattern(R"((track|collision)\s+(\d+)(?:-(\d+))?)", std::regex::icase);
  std::vector<EvidenceRef> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    std::string word = m[1].str();
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
    EvidenceRef ref;
    try {
      if (word == "track") {
        ref = {EvidenceRef::Kind::Track, static_cast<std::uint32_t>(std::stoul(m[2].str())), 0};
      } else {
        if (!m[3].matched) continue;
        ref = {EvidenceRef::Kind::Collision, static_cast<std::uint32_t>(std::stoul(m[2].str())),
               static_cast<std::uint32_t>(std::stoul(m[3].str()))};
      }
    } catch (const std::out_of_range&) {
      continue;  // ids beyond 32 bits cannot name anything
    }
    if (std::find(out.begin(), out.end(), ref) == out.end()) out.push_back(ref);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back(text.substr(start, end - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

Decision parse_decision(std::string_view text, bool chain_of_thought) {
  Decision d;
  bool have_final = false;
  for (std::string_view raw : split_lines(text)) {
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (have_final) throw ParseError("content after the FINAL line");
    if (starts_with(line, "STEP ")) {
      const std::size_t colon = line.find(':');
      if (colon == std::string_view::npos) throw ParseError("step line without ':'");
      const std::string_view num = trim(line.substr(5, colon - 5));
      if (num.empty() || !std::all_of(num.begin(), num.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw ParseError("step number is not an integer");
      }
      if (std::stoul(std::string(num)) != d.steps.size() + 1) throw ParseError("steps are not numbered consecutively");
      d.steps.emplace_back(trim(line.substr(colon + 1)));
      continue;
    }
    if (starts_with(line, "FINAL:")) {
      std::string_view rest = trim(line.substr(6));
      if (rest.empty() || rest.front() != '[') throw ParseError("FINAL line lacks a [Severity] tag");
      const std::size_t close = rest.find(']');
      if (close == std::string_view::npos) throw ParseError("unterminated severity tag");
      d.severity = severity_from_string(trim(rest.substr(1, close - 1)));
      d.final_text = std::string(trim(rest.substr(close + 1)));
      have_final = true;
      continue;
    }
    if (d.steps.empty()) throw ParseError("unexpected line before the first step");
    d.steps.back() += " ";
    d.steps.back() += line;
  }
  if (!have_final) throw ParseError("response has no FINAL line");
  if (chain_of_thought && d.steps.empty()) throw ParseError("chain-of-thought response has no steps");
  d.evidence = extract_evidence(d.final_text);
  return d;
}

// ---------------------------------------------------------------------------
// Mock model
// ---------------------------------------------------------------------------
namespace {

struct PromptView {
  Mission mission = Mission::TrafficSituation;
  QueryMode mode = QueryMode::Passive;
  double risk = 0.0;
  double ttc_term = 0.0;
  double proximity_term = 0.0;
  double violation_term = 0.0;
  struct TrackLine {
    std::uint32_t id;
    std::string cls;
    double dist;
  };
  struct CollisionLine {
    std::uint32_t a, b;
    double ttc;
  };
  std::vector<TrackLine> tracks;
  std::vector<CollisionLine> collisions;
  std::vector<std::uint32_t> violations;
  struct BoxLine {
    Mission mission;
    double age;
  };
  std::vector<BoxLine> boxes;
  bool cot = false;
};

PromptView read_prompt(std::string_view prompt) {
  static const std::regex risk_re(R"(RISK: ([0-9.]+) \(ttc ([0-9.]+), proximity ([0-9.]+), violation ([0-9.]+)\))");
  static const std::regex track_re(R"(TRACK (\d+) (\w+) at .* dist ([0-9.]+))");
  static const std::regex coll_re(R"(COLLISION (\d+)-(\d+) ttc ([0-9.]+))");
  static const std::regex box_re(R"(^- \[[^\]]*\] mission=(\w+) outcome=\w+ age=(\d+))");
  PromptView v;
  enum class Section { Other, Corpus, Task } section = Section::Other;
  for (std::string_view raw : split_lines(prompt)) {
    const std::string line(raw);
    if (starts_with(raw, "## ")) {
      section = raw == "## CORPUS SAMPLES" ? Section::Corpus : raw == "## TASK" ? Section::Task : Section::Other;
      continue;
    }
    std::smatch m;
    if (section == Section::Corpus) {
      if (std::regex_search(line, m, box_re)) {
        try {
          v.boxes.push_back({mission_from_string(m[1].str()), std::stod(m[2].str())});
        } catch (const SchemaError&) {
        }
      }
      continue;
    }
    if (section != Section::Task) continue;
    if (starts_with(raw, "MISSION: ")) {
      try {
        v.mission = mission_from_string(trim(raw.substr(9)));
      } catch (const SchemaError&) {
      }
    } else if (starts_with(raw, "MODE: ")) {
      v.mode = trim(raw.substr(6)) == "active" ? QueryMode::Active : QueryMode::Passive;
    } else if (std::regex_search(line, m, risk_re)) {
      v.risk = std::stod(m[1].str());
      v.ttc_term = std::stod(m[2].str());
      v.proximity_term = std::stod(m[3].str());
      v.violation_term = std::stod(m[4].str());
    } else if (std::regex_search(line, m, track_re)) {
      v.tracks.push_back({static_cast<std::uint32_t>(std::stoul(m[1].str())), m[2].str(), std::stod(m[3].str())});
    } else if (std::regex_search(line, m, coll_re)) {
      v.collisions.push_back({static_cast<std::uint32_t>(std::stoul(m[1].str())),
                              static_cast<std::uint32_t>(std::stoul(m[2].str())), std::stod(m[3].str())});
    } else if (starts_with(raw, "VIOLATION track ")) {
      v.violations.push_back(static_cast<std::uint32_t>(std::stoul(std::string(raw.substr(16)))));
    } else if (starts_with(raw, "INSTRUCTION: ")) {
      v.cot = raw.find("STEP n") != std::string_view::npos;
    }
  }
  return v;
}

Severity band_severity(double risk) {
  if (risk < 0.1) return Severity::Info;
  if (risk < 0.3) return Severity::Caution;
  if (risk < 0.6) return Severity::Warning;
  return Severity::Critical;
}

enum class Tier { Expert, Competent, Generic, Hallucinating };

std::string_view tier_name(Tier t) {
  switch (t) {
    case Tier::Expert:
      return "expert";
    case Tier::Competent:
      return "competent";
    case Tier::Generic:
      return "generic";
    case Tier::Hallucinating:
      return "hallucinating";
  }
  return "generic";
}

std::string collision_phrase(const PromptView::CollisionLine& c) {
  return "track " + std::to_string(c.a) + " and track " + std::to_string(c.b) + " are closing, collision " +
         std::to_string(c.a) + "-" + std::to_string(c.b) + " expected in " + fixed(c.ttc, 2) + " s";
}

std::string mission_advice(Mission m) {
  switch (m) {
    case Mission::AccidentPrediction:
      return "brake early and open the gap";
    case Mission::SafetyEvaluation:
      return "keep a safe distance";
    case Mission::TrafficViolation:
      return "expect non-compliant movement";
    case Mission::AccidentResponsibility:
      return "responsibility follows the party that failed to keep clear";
    case Mission::CausationAnalysis:
      return "the hazard stems from closing speed and limited sight lines";
    case Mission::DrivingCondition:
      return "conditions allow normal driving with attention";
    case Mission::TrafficCondition:
      return "traffic is moving";
    case Mission::TrafficSituation:
      return "monitor the surrounding road users";
  }
  return "stay attentive";
}

}  // namespace

double MockLlmClient::skill(std::string_view prompt) {
  const PromptView v = read_prompt(prompt);
  double support = 0.0;
  for (const auto& b : v.boxes) {
    const double rel = b.mission == v.mission ? 1.0 : 0.3;
    support += rel * std::pow(0.5, b.age / 500.0);
  }
  return std::min(0.85, 0.05 + 0.10 * support);
}

std::string MockLlmClient::complete(const std::string& prompt, double timeout_s) {
  if (cfg_.delay_s > timeout_s) {
    throw LlmTimeout("mock model delay " + fixed(cfg_.delay_s, 2) + " s exceeds timeout " + fixed(timeout_s, 2) + " s");
  }
  const PromptView v = read_prompt(prompt);
  const double s = skill(prompt);
  const double u = static_cast<double>(fnv1a64(prompt) >> 11) * 0x1.0p-53;

  Tier tier;
  if (u < s) {
    tier = Tier::Expert;
  } else {
    const double r = (u - s) / (1.0 - s);
    tier = r < 0.35 ? Tier::Competent : r < 0.7 ? Tier::Generic : Tier::Hallucinating;
  }

  const PromptView::CollisionLine* earliest = v.collisions.empty() ? nullptr : &v.collisions.front();
  const PromptView::CollisionLine* timely = nullptr;
  for (const auto& c : v.collisions) {
    if (c.ttc >= 1.0) {
      timely = &c;
      break;
    }
  }
  const PromptView::TrackLine* nearest = v.tracks.empty() ? nullptr : &v.tracks.front();

  std::string answer;
  bool cites = false;
  switch (tier) {
    case Tier::Expert:
      if (timely) {
        answer = collision_phrase(*timely);
        cites = true;
      } else if (v.mission == Mission::TrafficViolation && !v.violations.empty()) {
        answer = "track " + std::to_string(v.violations.front()) + " is violating the right of way";
        cites = true;
      } else if (nearest) {
        answer = "track " + std::to_string(nearest->id) + " (" + nearest->cls + ") is nearest at " +
                 fixed(nearest->dist, 1) + " m";
        cites = true;
      }
      break;
    case Tier::Competent:
      if (earliest) {
        answer = collision_phrase(*earliest);
        cites = true;
      } else if (nearest) {
        answer = "track " + std::to_string(nearest->id) + " is close by";
        cites = true;
      }
      break;
    case Tier::Generic:
      if (earliest) {
        answer = "collision " + std::to_string(earliest->a) + "-" + std::to_string(earliest->b) + " is possible";
        cites = true;
      } else {
        answer = "the road ahead needs attention";
      }
      break;
    case Tier::Hallucinating: {
      std::uint32_t ghost = 17;
      for (const auto& t : v.tracks) ghost = std::max(ghost, t.id + 17);
      answer = "track " + std::to_string(ghost) + " is cutting in";
      cites = true;
      break;
    }
  }
  if (answer.empty()) answer = "no specific hazard is visible";
  Severity sev = band_severity(v.risk);
  if (!cites && sev > Severity::Caution) sev = Severity::Caution;

  std::string out;
  if (v.cot) {
    out += "STEP 1: Mission " + std::string(to_string(v.mission)) + " in " + std::string(to_string(v.mode)) +
           " mode; risk " + fixed(v.risk, 3) + " with ttc term " + fixed(v.ttc_term, 3) + ", proximity term " +
           fixed(v.proximity_term, 3) + ", violation term " + fixed(v.violation_term, 3) + ".\n";
    out += "STEP 2: " + std::to_string(v.tracks.size()) + " confirmed tracks and " +
           std::to_string(v.collisions.size()) + " predicted conflicts are listed.\n";
    std::size_t relevant = 0;
    for (const auto& b : v.boxes) relevant += b.mission == v.mission ? 1 : 0;
    out += "STEP 3: " + std::to_string(v.boxes.size()) + " corpus samples, " + std::to_string(relevant) +
           " for this mission; answer style " + std::string(tier_name(tier)) + ".\n";
    out += "STEP 4: Severity follows the risk band" + std::string(cites ? "." : ", capped without evidence.") + "\n";
  }
  out += "FINAL: [" + std::string(to_string(sev)) + "] " + answer + "; " + mission_advice(v.mission) + ".\n";
  return out;
}

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------
HttpLlmClient::HttpLlmClient(std::string url) : url_(std::move(url)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url_, m, url_re)) throw ConfigError("invalid LLM endpoint '" + url_ + "'");
  host_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
}

std::string HttpLlmClient::complete(const std::string& prompt, double timeout_s) {
  httplib::Client cli(host_);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  auto res = cli.Post(path_, prompt, "text/plain");
  if (!res) {
    const httplib::Error err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw LlmTimeout("LLM endpoint " + url_ + " timed out: " + httplib::to_string(err));
    }
    throw TransportError("LLM endpoint " + url_ + " failed: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw TransportError("LLM endpoint " + url_ + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::unique_ptr<LlmClient> make_llm_client(const std::string& spec) {
  if (spec == "mock") return std::make_unique<MockLlmClient>();
  if (starts_with(spec, "http://")) return std::make_unique<HttpLlmClient>(spec);
  if (starts_with(spec, "http:")) {
    std::string url = spec.substr(5);
    if (url.find("://") == std::string::npos) url = "http://" + url;
    return std::make_unique<HttpLlmClient>(url);
  }
  throw ConfigError("unknown --llm value '" + spec + "' (expected mock or http:<url>)");
}

Decision invoke_llm(LlmClient& client, const PromptBundle& prompt, bool chain_of_thought, double timeout_s) {
  const std::string response = client.complete(prompt.rendered, timeout_s);
  return parse_decision(response, chain_of_thought);
}

}  // namespace sentinel
