#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentinel/bev.hpp"
#include "sentinel/session.hpp"
#include "sentinel/sensing.hpp"
#include "sentinel/world.hpp"

namespace sentinel {

inline constexpr double kMatchThreshold = 2.0;

// ---------------------------------------------------------------------------
// Detection matching and average precision
// ---------------------------------------------------------------------------
struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double center_dist_m = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

/// Predictions in descending confidence (index order on ties) each take the
/// nearest unmatched ground truth of the same class within `thresh_m`.
MatchResult match_detections(std::span<const Detection3D> preds, std::span<const Detection3D> gts,
                             double thresh_m = kMatchThreshold);

/// Predictions and ground truth of one frame. Ground truth uses Detection3D
/// with confidence ignored; `speed` holds the true speed.
struct EvalFrame {
  std::vector<Detection3D> preds;
  std::vector<Detection3D> gts;
};

/// Area under the max-precision envelope of the precision-recall curve for
/// one class over all frames. Throws NoGroundTruth when the class has none.
double average_precision(std::span<const EvalFrame> frames, ObjectClass cls, double thresh_m = kMatchThreshold);
/// Single-frame, class-agnostic form: every object is treated as one class.
double average_precision(std::span<const Detection3D> preds, std::span<const Detection3D> gts,
                         double thresh_m = kMatchThreshold);

/// Mean AP over the classes that have ground truth. Throws NoGroundTruth when
/// no class has any.
double mean_average_precision(std::span<const EvalFrame> frames, double thresh_m = kMatchThreshold);

struct TpRow {
  ObjectClass cls = ObjectClass::Car;
  std::size_t matches = 0;
  std::optional<double> mate;  // m
  std::optional<double> mase;  // 1 - IoU
  std::optional<double> maoe;  // rad
  std::optional<double> mave;  // m/s
};

/// Always four rows in the order Car, Truck, Van, Pedestrian; a class without
/// matches has empty values.
std::array<TpRow, 4> tp_metrics(std::span<const EvalFrame> frames, double thresh_m = kMatchThreshold);
std::array<TpRow, 4> tp_metrics(const MatchResult& matches, std::span<const Detection3D> preds,
                                std::span<const Detection3D> gts);

// ---------------------------------------------------------------------------
// BEV occupancy and instances
// ---------------------------------------------------------------------------
inline constexpr double kOccupancyThreshold = 0.65;

/// Binarised at p >= occ_thresh. Both empty gives 1. Throws SpecMismatch.
double bev_miou(const BevGrid& pred, const BevGrid& gt, double occ_thresh = kOccupancyThreshold);

/// Instance label raster: 0 is background, any other value an instance id.
struct LabelRaster {
  int cells_x = 0;
  int cells_y = 0;
  std::vector<std::uint32_t> labels;
};

/// Per tick: instances match at IoU > 0.5; VPQ_t = sum IoU(TP) / (TP + FP/2 +
/// FN/2), 1 when neither side has instances. Mean over ticks. Throws
/// LengthMismatch, SpecMismatch on differing raster sizes, EmptyInput on no
/// ticks.
double motion_vpq(std::span<const LabelRaster> pred, std::span<const LabelRaster> gt);

/// Ground-truth occupancy (1 inside a footprint, 0 elsewhere) on `spec`.
BevGrid rasterize_truth(std::span<const ActorState> actors, const GridSpec& spec);

/// Footprints painted with `ids[i]` (cell centre inside the rectangle; later
/// entries win on overlap).
LabelRaster rasterize_instances(std::span<const OrientedRect> rects, std::span<const std::uint32_t> ids,
                                const GridSpec& spec);

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------
struct ClassificationReport {
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro mean of per-class F1
  std::vector<std::string> labels;  // sorted union of gt and pred labels
  std::vector<std::vector<std::size_t>> confusion;  // [gt][pred]
};

/// Macro averages over the labels present in `gts`. Throws LengthMismatch,
/// EmptyInput.
ClassificationReport classification_report(std::span<const std::string> preds, std::span<const std::string> gts);

// ---------------------------------------------------------------------------
// Alert rating
// ---------------------------------------------------------------------------
enum class Rating : std::uint8_t { Good, Middle, Normal, Bad };
inline constexpr std::array<Rating, 4> kAllRatings = {Rating::Good, Rating::Middle, Rating::Normal, Rating::Bad};
std::string_view to_string(Rating r);

inline constexpr std::string_view kRaterVersion = "reference-rater-v1";

/// What the perception stack held at one tick; the rater's ground truth.
struct TickEvidence {
  std::vector<std::uint32_t> tracks;
  std::vector<CollisionPrediction> collisions;
};

using EvidenceIndex = std::map<std::int64_t, TickEvidence>;

TickEvidence evidence_of(const PerceptionProduct& p);

/// Good: grounded, specific and timely. Middle: grounded and specific.
/// Normal: grounded. Bad: anything else, including the fallback marker.
/// Grounded: evidence non-empty and every reference exists at the alert tick.
/// Specific: names a track. Timely: every referenced collision is >= 1 s out.
Rating rate_alert(const SafetyAlert& alert, const EvidenceIndex& truth);

struct RatingHistogram {
  std::map<Mission, std::array<std::size_t, 4>> counts;  // all eight missions present

  RatingHistogram();
  void add(Mission m, Rating r);
  std::size_t total() const;
  std::size_t total(Mission m) const;
  double percent(Mission m, Rating r) const;  // 0 when the mission has no alerts
  /// Mean Good% over the missions that have at least one alert.
  double mean_good_percent() const;
  RatingHistogram& operator+=(const RatingHistogram& o);
};

RatingHistogram rate_alerts(std::span<const SafetyAlert> alerts, const EvidenceIndex& truth);

}  // namespace sentinel
