#include "sentinel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

namespace sentinel {

MatchResult match_detections(std::span<const Detection3D> preds, std::span<const Detection3D> gts, double thresh_m) {
  if (!(thresh_m > 0.0)) throw ValidationError("match threshold must be positive");
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].confidence > preds[b].confidence; });
  std::vector<bool> taken(gts.size(), false);
  MatchResult r;
  for (std::size_t pi : order) {
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (taken[gi] || gts[gi].cls != preds[pi].cls) continue;
      const double d = distance(preds[pi].center, gts[gi].center);
      if (d <= thresh_m && (!best || d < best_d)) {
        best = gi;
        best_d = d;
      }
    }
    if (best) {
      taken[*best] = true;
      r.pairs.push_back({pi, *best, best_d});
    } else {
      r.unmatched_preds.push_back(pi);
    }
  }
  for (std::size_t gi = 0; gi < gts.size(); ++gi) {
    if (!taken[gi]) r.unmatched_gts.push_back(gi);
  }
  std::sort(r.unmatched_preds.begin(), r.unmatched_preds.end());
  return r;
}

double average_precision(std::span<const EvalFrame> frames, ObjectClass cls, double thresh_m) {
  struct Scored {
    double conf;
    bool tp;
  };
  std::vector<Scored> scored;
  std::size_t n_gt = 0;
  for (const EvalFrame& f : frames) {
    std::vector<Detection3D> preds;
    std::vector<Detection3D> gts;
    for (const auto& p : f.preds) {
      if (p.cls == cls) preds.push_back(p);
    }
    for (const auto& g : f.gts) {
      if (g.cls == cls) gts.push_back(g);
    }
    n_gt += gts.size();
    const MatchResult m = match_detections(preds, gts, thresh_m);
    std::vector<bool> tp(preds.size(), false);
    for (const MatchPair& pair : m.pairs) tp[pair.pred] = true;
    for (std::size_t i = 0; i < preds.size(); ++i) scored.push_back({preds[i].confidence, tp[i]});
  }
  if (n_gt == 0) throw NoGroundTruth("no ground truth for class " + std::string(to_string(cls)));
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.conf > b.conf; });

  std::vector<double> precision(scored.size());
  std::vector<double> recall(scored.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    tp += scored[i].tp ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  // Envelope: precision at i becomes the best precision at any later point.
  for (std::size_t i = scored.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (!scored[i].tp) continue;
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double average_precision(std::span<const Detection3D> preds, std::span<const Detection3D> gts, double thresh_m) {
  EvalFrame f{{preds.begin(), preds.end()}, {gts.begin(), gts.end()}};
  for (auto& p : f.preds) p.cls = ObjectClass::Car;
  for (auto& g : f.gts) g.cls = ObjectClass::Car;
  return average_precision(std::span<const EvalFrame>(&f, 1), ObjectClass::Car, thresh_m);
}

double mean_average_precision(std::span<const EvalFrame> frames, double thresh_m) {
  double sum = 0.0;
  int n = 0;
  for (ObjectClass c : kAllClasses) {
    try {
      sum += average_precision(frames, c, thresh_m);
      ++n;
    } catch (const NoGroundTruth&) {
    }
  }
  if (n == 0) throw NoGroundTruth("no ground truth for any class");
  return sum / n;
}

namespace {

struct TpAccum {
  std::size_t n = 0;
  double ate = 0.0;
  double ase = 0.0;
  double aoe = 0.0;
  double ave = 0.0;
};

void accumulate(std::array<TpAccum, 4>& acc, const MatchResult& m, std::span<const Detection3D> preds,
                std::span<const Detection3D> gts) {
  for (const MatchPair& pair : m.pairs) {
    const Detection3D& p = preds[pair.pred];
    const Detection3D& g = gts[pair.gt];
    TpAccum& a = acc[class_index(g.cls)];
    ++a.n;
    a.ate += distance(p.center, g.center);
    a.ase += 1.0 - aligned_iou(p.footprint, g.footprint);
    a.aoe += std::abs(wrap_angle(p.yaw - g.yaw));
    a.ave += std::abs(p.speed - g.speed);
  }
}

std::array<TpRow, 4> finish(const std::array<TpAccum, 4>& acc) {
  std::array<TpRow, 4> rows;
  for (ObjectClass c : kAllClasses) {
    const TpAccum& a = acc[class_index(c)];
    TpRow& r = rows[class_index(c)];
    r.cls = c;
    r.matches = a.n;
    if (a.n == 0) continue;
    const double n = static_cast<double>(a.n);
    r.mate = a.ate / n;
    r.mase = a.ase / n;
    r.maoe = a.aoe / n;
    r.mave = a.ave / n;
  }
  return rows;
}

}  // namespace

std::array<TpRow, 4> tp_metrics(std::span<const EvalFrame> frames, double thresh_m) {
  std::array<TpAccum, 4> acc{};
  for (const EvalFrame& f : frames) accumulate(acc, match_detections(f.preds, f.gts, thresh_m), f.preds, f.gts);
  return finish(acc);
}

std::array<TpRow, 4> tp_metrics(const MatchResult& matches, std::span<const Detection3D> preds,
                                std::span<const Detection3D> gts) {
  std::array<TpAccum, 4> acc{};
  accumulate(acc, matches, preds, gts);
  return finish(acc);
}

double bev_miou(const BevGrid& pred, const BevGrid& gt, double occ_thresh) {
  if (!(pred.spec() == gt.spec())) throw SpecMismatch("bev_miou: grids have different specs");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.cells().size(); ++i) {
    const bool a = pred.cells()[i] >= occ_thresh;
    const bool b = gt.cells()[i] >= occ_thresh;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double motion_vpq(std::span<const LabelRaster> pred, std::span<const LabelRaster> gt) {
  if (pred.size() != gt.size()) throw LengthMismatch("motion_vpq: tick ranges differ");
  if (pred.empty()) throw EmptyInput("motion_vpq: no ticks");
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const LabelRaster& p = pred[t];
    const LabelRaster& g = gt[t];
    if (p.cells_x != g.cells_x || p.cells_y != g.cells_y || p.labels.size() != g.labels.size()) {
      throw SpecMismatch("motion_vpq: raster sizes differ at tick index " + std::to_string(t));
    }
    std::map<std::uint32_t, std::size_t> area_p;
    std::map<std::uint32_t, std::size_t> area_g;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> inter;
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
      const std::uint32_t a = p.labels[i];
      const std::uint32_t b = g.labels[i];
      if (a) ++area_p[a];
      if (b) ++area_g[b];
      if (a && b) ++inter[{a, b}];
    }
    if (area_p.empty() && area_g.empty()) {
      sum += 1.0;
      continue;
    }
    // IoU > 0.5 makes matches unique on both sides.
    double iou_sum = 0.0;
    std::size_t tp = 0;
    for (const auto& [key, n] : inter) {
      const double u = static_cast<double>(area_p[key.first] + area_g[key.second] - n);
      const double iou = static_cast<double>(n) / u;
      if (iou > 0.5) {
        iou_sum += iou;
        ++tp;
      }
    }
    const double fp = static_cast<double>(area_p.size() - tp);
    const double fn = static_cast<double>(area_g.size() - tp);
    sum += iou_sum / (static_cast<double>(tp) + 0.5 * fp + 0.5 * fn);
  }
  return sum / static_cast<double>(pred.size());
}

namespace {

template <typename Fn>
void paint_rect(const OrientedRect& r, const GridSpec& spec, Fn&& fn) {
  const double reach = 0.5 * std::hypot(r.length, r.width);
  const int c0 = std::max(0, static_cast<int>(std::floor(spec.cells_x / 2.0 + (r.center.x - reach - spec.origin.x) / spec.resolution)));
  const int c1 = std::min(spec.cells_x - 1, static_cast<int>(std::floor(spec.cells_x / 2.0 + (r.center.x + reach - spec.origin.x) / spec.resolution)));
  const int r0 = std::max(0, static_cast<int>(std::floor(spec.cells_y / 2.0 + (r.center.y - reach - spec.origin.y) / spec.resolution)));
  const int r1 = std::min(spec.cells_y - 1, static_cast<int>(std::floor(spec.cells_y / 2.0 + (r.center.y + reach - spec.origin.y) / spec.resolution)));
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      if (r.contains(cell_center({col, row}, spec))) fn(col, row);
    }
  }
}

}  // namespace

BevGrid rasterize_truth(std::span<const ActorState> actors, const GridSpec& spec) {
  spec.validate();
  BevGrid g(spec, 0.0);
  for (const ActorState& a : actors) paint_rect(a.rect(), spec, [&](int c, int r) { g.at(c, r) = 1.0; });
  return g;
}

LabelRaster rasterize_instances(std::span<const OrientedRect> rects, std::span<const std::uint32_t> ids,
                                const GridSpec& spec) {
  if (rects.size() != ids.size()) throw LengthMismatch("rasterize_instances: rects and ids differ in length");
  spec.validate();
  LabelRaster out{spec.cells_x, spec.cells_y, std::vector<std::uint32_t>(spec.size(), 0)};
  for (std::size_t i = 0; i < rects.size(); ++i) {
    paint_rect(rects[i], spec, [&](int c, int r) {
      out.labels[static_cast<std::size_t>(r) * static_cast<std::size_t>(spec.cells_x) + static_cast<std::size_t>(c)] =
          ids[i];
    });
  }
  return out;
}

ClassificationReport classification_report(std::span<const std::string> preds, std::span<const std::string> gts) {
  if (preds.size() != gts.size()) throw LengthMismatch("classification_report: preds and gts differ in length");
  if (gts.empty()) throw EmptyInput("classification_report: no samples");
  ClassificationReport rep;
  std::set<std::string> all(gts.begin(), gts.end());
  all.insert(preds.begin(), preds.end());
  rep.labels.assign(all.begin(), all.end());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < rep.labels.size(); ++i) index[rep.labels[i]] = i;
  rep.confusion.assign(rep.labels.size(), std::vector<std::size_t>(rep.labels.size(), 0));
  for (std::size_t i = 0; i < gts.size(); ++i) ++rep.confusion[index[gts[i]]][index[preds[i]]];

  std::size_t correct = 0;
  for (std::size_t i = 0; i < rep.labels.size(); ++i) correct += rep.confusion[i][i];
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(gts.size());

  const std::set<std::string> present(gts.begin(), gts.end());
  for (const std::string& label : present) {
    const std::size_t c = index[label];
    std::size_t gt_count = 0;
    std::size_t pred_count = 0;
    for (std::size_t j = 0; j < rep.labels.size(); ++j) {
      gt_count += rep.confusion[c][j];
      pred_count += rep.confusion[j][c];
    }
    const double tp = static_cast<double>(rep.confusion[c][c]);
    const double p = pred_count ? tp / static_cast<double>(pred_count) : 0.0;
    const double r = tp / static_cast<double>(gt_count);
    rep.precision += p;
    rep.recall += r;
    rep.f1 += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  const double n = static_cast<double>(present.size());
  rep.precision /= n;
  rep.recall /= n;
  rep.f1 /= n;
  return rep;
}

std::string_view to_string(Rating r) {
  switch (r) {
    case Rating::Good:
      return "Good";
    case Rating::Middle:
      return "Middle";
    case Rating::Normal:
      return "Normal";
    case Rating::Bad:
      return "Bad";
  }
  return "Bad";
}

TickEvidence evidence_of(const PerceptionProduct& p) {
  TickEvidence e;
  for (const Track& t : p.tracks) e.tracks.push_back(t.id);
  e.collisions = p.collisions;
  return e;
}

Rating rate_alert(const SafetyAlert& alert, const EvidenceIndex& truth) {
  if (alert.fallback || alert.evidence.empty()) return Rating::Bad;
  auto it = truth.find(alert.tick);
  if (it == truth.end()) return Rating::Bad;
  const TickEvidence& ev = it->second;
  bool specific = false;
  bool timely = true;
  for (const EvidenceRef& ref : alert.evidence) {
    if (ref.kind == EvidenceRef::Kind::Track) {
      if (std::find(ev.tracks.begin(), ev.tracks.end(), ref.a) == ev.tracks.end()) return Rating::Bad;
      specific = true;
      continue;
    }
    const std::uint32_t lo = std::min(ref.a, ref.b);
    const std::uint32_t hi = std::max(ref.a, ref.b);
    auto c = std::find_if(ev.collisions.begin(), ev.collisions.end(), [&](const CollisionPrediction& p) {
      return p.track_a == lo && p.track_b == hi;
    });
    if (c == ev.collisions.end()) return Rating::Bad;
    if (c->ttc_s < 1.0 - 1e-9) timely = false;
  }
  if (specific && timely) return Rating::Good;
  if (specific) return Rating::Middle;
  return Rating::Normal;
}

RatingHistogram::RatingHistogram() {
  for (Mission m : kAllMissions) counts[m] = {0, 0, 0, 0};
}

void RatingHistogram::add(Mission m, Rating r) { ++counts[m][static_cast<std::size_t>(r)]; }

std::size_t RatingHistogram::total() const {
  std::size_t n = 0;
  for (const auto& [m, c] : counts) n += c[0] + c[1] + c[2] + c[3];
  return n;
}

std::size_t RatingHistogram::total(Mission m) const {
  const auto& c = counts.at(m);
  return c[0] + c[1] + c[2] + c[3];
}

double RatingHistogram::percent(Mission m, Rating r) const {
  const std::size_t n = total(m);
  if (n == 0) return 0.0;
  return 100.0 * static_cast<double>(counts.at(m)[static_cast<std::size_t>(r)]) / static_cast<double>(n);
}

double RatingHistogram::mean_good_percent() const {
  double sum = 0.0;
  int n = 0;
  for (Mission m : kAllMissions) {
    if (total(m) == 0) continue;
    sum += percent(m, Rating::Good);
    ++n;
  }
  return n ? sum / n : 0.0;
}

RatingHistogram& RatingHistogram::operator+=(const RatingHistogram& o) {
  for (const auto& [m, c] : o.counts) {
    for (std::size_t i = 0; i < 4; ++i) counts[m][i] += c[i];
  }
  return *this;
}

RatingHistogram rate_alerts(std::span<const SafetyAlert> alerts, const EvidenceIndex& truth) {
  RatingHistogram h;
  for (const SafetyAlert& a : alerts) h.add(a.mission, rate_alert(a, truth));
  return h;
}

}  // namespace sentinel
