#include "sentinel/prompt.hpp"

#include <algorithm>
#include <cstdio>

#include "text_util.hpp"

namespace sentinel {

namespace {

constexpr std::string_view kSystemPreamble =
    "You are a traffic-safety co-pilot. You receive a fused bird's-eye-view summary of the scene "
    "gathered from vehicles and roadside units, records retrieved from earlier frames, a short-term "
    "cache of this drive, and prior experience boxes. Answer the task using only the evidence given. "
    "Never cite a track or collision that is not listed in the evidence.";

constexpr std::size_t kMaxTracksInTask = 8;
constexpr std::size_t kMaxCollisionsInTask = 5;

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string render(const PromptBundle& b, std::int64_t now_tick) {
  std::string out;
  out += "## SYSTEM\n";
  out += b.system;
  out += "\n\n## RAW BACKUP\n";
  if (b.raw_backup.empty()) {
    out += kNoRawMarker;
    out += '\n';
  }
  for (const RawRecord& r : b.raw_backup) out += "- t" + std::to_string(r.tick) + ": " + r.text + "\n";
  out += "\n## TEMPORAL CACHE\n";
  if (b.temporal_cache.empty()) {
    out += kNoCacheMarker;
    out += '\n';
  }
  for (const CacheEntry& c : b.temporal_cache) out += "- t" + std::to_string(c.tick) + ": " + c.text + "\n";
  out += "\n## CORPUS SAMPLES\n";
  if (b.sampled_boxes.empty()) {
    out += kNoCorpusMarker;
    out += '\n';
  }
  for (const ScoredBox& s : b.sampled_boxes) out += render_box_line(s, now_tick) + "\n";
  out += "\n## TASK\n";
  out += b.task_instruction;
  return out;
}

}  // namespace

std::string render_box_line(const ScoredBox& box, std::int64_t now_tick) {
  const std::int64_t age = std::max<std::int64_t>(0, now_tick - box.box.created_tick);
  return "- [" + box.box.box_id + "] mission=" + std::string(to_string(box.box.mission)) +
         " outcome=" + std::string(to_string(box.box.outcome)) + " age=" + std::to_string(age) +
         " p=" + fixed(box.priority, 3) + " tags=" + join(box.box.tags, ",") + " :: " + box.box.summary_text;
}

std::string render_task(const QueryJob& job, bool chain_of_thought) {
  std::string out;
  out += "MISSION: " + std::string(to_string(job.mission)) + "\n";
  out += "MODE: " + std::string(to_string(job.mode)) + "\n";
  out += "TICK: " + std::to_string(job.tick) + "\n";
  out += "RISK: " + fixed(job.risk.value, 3) + " (ttc " + fixed(job.risk.ttc_term, 3) + ", proximity " +
         fixed(job.risk.proximity_term, 3) + ", violation " + fixed(job.risk.violation_term, 3) + ")\n";
  out += "EVIDENCE:\n";
  if (job.scene.tracks.empty() && job.scene.collisions.empty() && job.scene.violations.empty()) {
    out += "[no confirmed tracks]\n";
  }
  for (std::size_t i = 0; i < job.scene.tracks.size() && i < kMaxTracksInTask; ++i) {
    const TrackBrief& t = job.scene.tracks[i];
    out += "TRACK " + std::to_string(t.id) + " " + std::string(to_string(t.cls)) + " at (" + fixed(t.position.x, 2) +
           ", " + fixed(t.position.y, 2) + ") speed " + fixed(t.speed, 2) + " dist " + fixed(t.distance_m, 2) + "\n";
  }
  for (std::size_t i = 0; i < job.scene.collisions.size() && i < kMaxCollisionsInTask; ++i) {
    const CollisionPrediction& c = job.scene.collisions[i];
    out += "COLLISION " + std::to_string(c.track_a) + "-" + std::to_string(c.track_b) + " ttc " + fixed(c.ttc_s, 2) +
           " at (" + fixed(c.closest_point.x, 2) + ", " + fixed(c.closest_point.y, 2) + ")\n";
  }
  for (std::uint32_t v : job.scene.violations) out += "VIOLATION track " + std::to_string(v) + "\n";
  out += "QUESTION: " + job.text + "\n";
  out += "TAGS: " + join(job.tags, ",") + "\n";
  if (chain_of_thought) {
    out += "INSTRUCTION: Think step by step. Reply with lines \"STEP n: ...\" numbered from 1, then one line "
           "\"FINAL: [Severity] answer\" with Severity one of Info, Caution, Warning, Critical. Cite tracks as "
           "\"track <id>\" and collisions as \"collision <a>-<b>\".\n";
  } else {
    out += "INSTRUCTION: Reply with one line \"FINAL: [Severity] answer\" with Severity one of Info, Caution, "
           "Warning, Critical. Cite tracks as \"track <id>\" and collisions as \"collision <a>-<b>\".\n";
  }
  return out;
}

PromptBundle generate_prompt(const QueryJob& job, std::vector<ScoredBox> sampled, std::vector<CacheEntry> cache,
                             std::vector<RawRecord> raw, const PromptConfig& cfg) {
  PromptBundle b;
  b.system = std::string(kSystemPreamble);
  b.task_instruction = render_task(job, cfg.chain_of_thought);
  std::stable_sort(sampled.begin(), sampled.end(), ranks_before);
  std::stable_sort(raw.begin(), raw.end(), [](const RawRecord& a, const RawRecord& c) { return a.tick < c.tick; });
  std::stable_sort(cache.begin(), cache.end(),
                   [](const CacheEntry& a, const CacheEntry& c) { return a.tick < c.tick; });
  b.sampled_boxes = std::move(sampled);
  b.raw_backup = std::move(raw);
  b.temporal_cache = std::move(cache);

  b.rendered = render(b, job.corpus_tick);
  while (b.rendered.size() > cfg.budget_chars && !b.sampled_boxes.empty()) {
    b.sampled_boxes.pop_back();
    ++b.dropped_boxes;
    b.rendered = render(b, job.corpus_tick);
  }
  while (b.rendered.size() > cfg.budget_chars && !b.raw_backup.empty()) {
    b.raw_backup.erase(b.raw_backup.begin());
    ++b.dropped_raw;
    b.rendered = render(b, job.corpus_tick);
  }
  while (b.rendered.size() > cfg.budget_chars && !b.temporal_cache.empty()) {
    b.temporal_cache.erase(b.temporal_cache.begin());
    ++b.dropped_cache;
    b.rendered = render(b, job.corpus_tick);
  }
  if (b.rendered.size() > cfg.budget_chars) {
    b.rendered.resize(cfg.budget_chars);
    b.truncated = true;
  }
  b.digest = hex64(fnv1a64(b.rendered));
  return b;
}

}  // namespace sentinel
