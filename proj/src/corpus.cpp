#include "sentinel/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>

#include "json_util.hpp"

namespace sentinel {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Success:
      return "success";
    case Outcome::Failure:
      return "failure";
    case Outcome::Neutral:
      return "neutral";
  }
  return "neutral";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "success") return Outcome::Success;
  if (s == "failure") return Outcome::Failure;
  if (s == "neutral") return Outcome::Neutral;
  throw SchemaError("unknown outcome '" + std::string(s) + "'");
}

std::string box_to_json_line(const CorpusBox& box) {
  nlohmann::ordered_json j;
  j["box_id"] = box.box_id;
  j["mission"] = std::string(to_string(box.mission));
  j["summary_text"] = box.summary_text;
  j["tags"] = box.tags;
  j["created_tick"] = box.created_tick;
  j["outcome"] = std::string(to_string(box.outcome));
  j["payload_ref"] = box.payload_ref;
  return j.dump();
}

CorpusBox box_from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("corpus record is not valid JSON: ") + e.what());
  }
  constexpr std::string_view where = "corpus record";
  detail::require_object(j, where);
  detail::reject_unknown(j, {"box_id", "mission", "summary_text", "tags", "created_tick", "outcome", "payload_ref"},
                         where);
  CorpusBox b;
  b.box_id = detail::get_string(j, "box_id", where);
  b.mission = mission_from_string(detail::get_string(j, "mission", where));
  b.summary_text = detail::get_string(j, "summary_text", where);
  for (const auto& t : detail::get_array(j, "tags", where)) {
    if (!t.is_string()) throw SchemaError("corpus record: tags must be strings");
    b.tags.push_back(t.get<std::string>());
  }
  const auto& tick = detail::field(j, "created_tick", where);
  if (!tick.is_number_integer()) throw SchemaError("corpus record: created_tick must be an integer");
  b.created_tick = tick.get<std::int64_t>();
  b.outcome = outcome_from_string(detail::get_string(j, "outcome", where));
  b.payload_ref = detail::get_string(j, "payload_ref", where);
  return b;
}

CorpusStore::CorpusStore(std::filesystem::path log_path) : path_(std::move(log_path)) {
  std::ifstream in(*path_);
  if (!in) return;  // a missing log is an empty store
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    CorpusBox box;
    try {
      box = box_from_json_line(line);
    } catch (const SchemaError& e) {
      throw SchemaError(path_->string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids_.insert(box.box_id).second) {
      throw ValidationError(path_->string() + ": duplicate box id '" + box.box_id + "'");
    }
    boxes_.push_back(std::move(box));
  }
}

void CorpusStore::append(const CorpusBox& box) {
  if (box.summary_text.empty()) throw ValidationError("corpus box '" + box.box_id + "' has an empty summary");
  std::unique_lock lock(mu_);
  if (ids_.count(box.box_id)) throw ValidationError("duplicate corpus box id '" + box.box_id + "'");
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw IoError("cannot append to corpus log '" + path_->string() + "'");
    out << box_to_json_line(box) << '\n';
    out.flush();
    if (!out) throw IoError("write to corpus log '" + path_->string() + "' failed");
  }
  ids_.insert(box.box_id);
  boxes_.push_back(box);
}

std::vector<CorpusBox> CorpusStore::snapshot() const {
  std::shared_lock lock(mu_);
  return boxes_;
}

std::size_t CorpusStore::size() const {
  std::shared_lock lock(mu_);
  return boxes_.size();
}

bool CorpusStore::contains(const std::string& box_id) const {
  std::shared_lock lock(mu_);
  return ids_.count(box_id) > 0;
}

double outcome_weight(Outcome o) {
  switch (o) {
    case Outcome::Success:
      return 1.0;
    case Outcome::Failure:
      return 0.8;
    case Outcome::Neutral:
      return 0.5;
  }
  return 0.5;
}

double tag_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double recency_weight(std::int64_t created_tick, std::int64_t now_tick, double half_life_ticks) {
  const double age = static_cast<double>(std::max<std::int64_t>(0, now_tick - created_tick));
  return std::pow(0.5, age / half_life_ticks);
}

double box_priority(const CorpusBox& box, const std::vector<std::string>& job_tags, std::int64_t now_tick,
                    const SamplingConfig& cfg) {
  return cfg.w_relevance * tag_jaccard(box.tags, job_tags) +
         cfg.w_recency * recency_weight(box.created_tick, now_tick, cfg.half_life_ticks) +
         cfg.w_outcome * outcome_weight(box.outcome);
}

bool ranks_before(const ScoredBox& a, const ScoredBox& b) {
  if (a.priority != b.priority) return a.priority > b.priority;
  if (a.box.created_tick != b.box.created_tick) return a.box.created_tick > b.box.created_tick;
  return a.box.box_id < b.box.box_id;
}

std::vector<ScoredBox> sample_corpus(const CorpusStore& store, const QueryJob& job, std::size_t k,
                                     const SamplingConfig& cfg) {
  std::vector<ScoredBox> scored;
  for (CorpusBox& box : store.snapshot()) {
    const double p = box_priority(box, job.tags, job.corpus_tick, cfg);
    scored.push_back({std::move(box), p});
  }
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), ranks_before);
  scored.resize(n);
  return scored;
}

}  // namespace sentinel
