#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/pipeline.hpp"
#include "sentinel/scenario_gen.hpp"

namespace sentinel {

// ---------------------------------------------------------------------------
// Perception report over episode logs
// ---------------------------------------------------------------------------
struct PerceptionReport {
  std::size_t logs = 0;
  std::size_t frames = 0;  // ticks with a fused product
  double map = 0.0;
  std::array<std::optional<double>, 4> ap{};  // per class; empty without ground truth
  std::array<TpRow, 4> tp{};
  double recall = 0.0;  // matched ground truth over all ground truth
  std::optional<double> miou;
  std::optional<double> vpq;
};

/// Truth actors against fused detections, fused grids against rasterised
/// truth, track footprints against actor footprints. Throws IoError for a
/// missing log (the path is in the message) and SchemaError for a bad one.
PerceptionReport evaluate_logs(const std::vector<std::filesystem::path>& logs);

nlohmann::json perception_report_json(const PerceptionReport& r);
std::string perception_report_text(const PerceptionReport& r);

// ---------------------------------------------------------------------------
// Renewal and intensity sweeps
// ---------------------------------------------------------------------------
struct SweepOptions {
  std::size_t epochs = 2;        // passes over the suite per column
  std::size_t candidate_k = 10;  // finalize candidates per clean episode
  PromptLevel level = PromptLevel::Middle;  // held fixed in the renewal sweep
  double renewal_rate = 0.5;                // held fixed in the intensity sweep
  double threshold = 0.3;
};

struct SweepColumn {
  std::string label;  // "rho=0.1", "High", ...
  double parameter = 0.0;
  RatingHistogram histogram;
  std::size_t decision_frames = 0;
  std::size_t committed_boxes = 0;
};

struct SweepTable {
  std::string name;       // "renewal" or "intensity"
  std::string parameter;  // "renewal_rate" or "prompt_level"
  std::vector<SweepColumn> columns;
};

/// Perception of every suite scenario, reseeded from `seed`. Perception does
/// not depend on reasoning, so one trace per scenario serves every column.
std::vector<PerceptionTrace> simulate_suite(std::vector<Scenario>& suite, std::uint64_t seed);

/// Per rate: fresh store, the suite run `epochs` times in order with
/// finalize_episode(rate), every alert rated by the reference rater.
SweepTable run_renewal_sweep(std::vector<Scenario> suite, const std::vector<double>& rates, std::uint64_t seed,
                             const SweepOptions& opts = {});
SweepTable run_intensity_sweep(std::vector<Scenario> suite, const std::vector<PromptLevel>& levels,
                               std::uint64_t seed, const SweepOptions& opts = {});

/// Column runners over prepared traces (what the two sweeps call).
SweepColumn run_sweep_column(const std::vector<Scenario>& suite, const std::vector<PerceptionTrace>& traces,
                             double renewal_rate, PromptLevel level, const SweepOptions& opts);

nlohmann::json sweep_json(const SweepTable& t);
std::string sweep_text(const SweepTable& t);

struct EvalConfig {
  std::string mode = "perception";  // perception | sweeps
  std::vector<std::string> logs;    // perception mode
  std::string suite_dir;            // sweeps mode
  std::uint64_t seed = kSuiteSeed;
  std::string out_dir = "out";
  SweepOptions sweep{};

  void validate() const;  // ConfigError
};

/// Writes the reports for `mode` as JSON and aligned text; returns the paths
/// written. Throws ConfigError, IoError.
std::vector<std::filesystem::path> cmd_eval(const EvalConfig& cfg);

inline const std::vector<double> kRenewalRates = {0.1, 0.3, 0.5, 0.7, 0.9};
inline const std::vector<PromptLevel> kPromptLevels = {PromptLevel::Mini, PromptLevel::Middle, PromptLevel::High};

}  // namespace sentinel
