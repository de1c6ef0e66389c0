#pragma once

// Brute-force reference implementations for the metric tests. These are
// written from the metric definitions, deliberately without sharing code
// with the library, and favour obviousness over speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sentinel/metrics.hpp"

namespace oracle {

using sentinel::Detection3D;
using sentinel::ObjectClass;

inline double dist(const Detection3D& a, const Detection3D& b) {
  const double dx = a.center.x - b.center.x;
  const double dy = a.center.y - b.center.y;
  return std::sqrt(dx * dx + dy * dy);
}

// pred index -> gt index, greedy by confidence (earlier index on ties), each
// prediction claiming the nearest unclaimed same-class gt within `thresh`.
inline std::map<std::size_t, std::size_t> match(const std::vector<Detection3D>& preds,
                                                const std::vector<Detection3D>& gts, double thresh) {
  std::map<std::size_t, std::size_t> out;
  std::vector<bool> done(preds.size(), false);
  std::vector<bool> claimed(gts.size(), false);
  for (std::size_t round = 0; round < preds.size(); ++round) {
    std::size_t pick = preds.size();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (done[i]) continue;
      if (pick == preds.size() || preds[i].confidence > preds[pick].confidence) pick = i;
    }
    done[pick] = true;
    std::size_t best = gts.size();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (claimed[j] || gts[j].cls != preds[pick].cls) continue;
      const double d = dist(preds[pick], gts[j]);
      if (d > thresh) continue;
      if (best == gts.size() || d < dist(preds[pick], gts[best])) best = j;
    }
    if (best != gts.size()) {
      claimed[best] = true;
      out[pick] = best;
    }
  }
  return out;
}

// All-point interpolated AP: the integral over recall of the best precision
// reachable at that recall or beyond.
inline std::optional<double> average_precision(const std::vector<sentinel::EvalFrame>& frames, ObjectClass cls,
                                               double thresh) {
  struct Item {
    double conf;
    std::size_t frame;
    std::size_t index;
    bool tp;
  };
  std::vector<Item> items;
  std::size_t n_gt = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::vector<Detection3D> p;
    std::vector<Detection3D> g;
    for (const auto& d : frames[f].preds)
      if (d.cls == cls) p.push_back(d);
    for (const auto& d : frames[f].gts)
      if (d.cls == cls) g.push_back(d);
    n_gt += g.size();
    const auto m = match(p, g, thresh);
    for (std::size_t i = 0; i < p.size(); ++i) items.push_back({p[i].confidence, f, i, m.count(i) > 0});
  }
  if (n_gt == 0) return std::nullopt;
  // Rank by confidence; equal confidences keep frame then index order.
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });
  std::vector<double> prec;
  std::vector<double> rec;
  for (std::size_t k = 0; k < items.size(); ++k) {
    std::size_t tp = 0;
    for (std::size_t j = 0; j <= k; ++j) tp += items[j].tp;
    prec.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    rec.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  double ap = 0.0;
  double last_r = 0.0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (rec[k] <= last_r) continue;
    double best = 0.0;
    for (std::size_t j = 0; j < items.size(); ++j)
      if (rec[j] >= rec[k]) best = std::max(best, prec[j]);
    ap += (rec[k] - last_r) * best;
    last_r = rec[k];
  }
  return ap;
}

inline std::optional<double> mean_ap(const std::vector<sentinel::EvalFrame>& frames, double thresh) {
  double s = 0.0;
  int n = 0;
  for (ObjectClass c : sentinel::kAllClasses) {
    if (auto ap = average_precision(frames, c, thresh)) {
      s += *ap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

inline double angle_error(double a, double b) {
  const double d = std::atan2(std::sin(a - b), std::cos(a - b));
  return std::fabs(d);
}

// IoU of two boxes sharing centre and heading.
inline double box_iou(sentinel::Footprint a, sentinel::Footprint b) {
  const double inter = std::min(a.length, b.length) * std::min(a.width, b.width);
  return inter / (a.length * a.width + b.length * b.width - inter);
}

struct TpOracle {
  std::size_t n = 0;
  std::array<double, 4> mean{};  // ATE, ASE, AOE, AVE
};

inline std::array<TpOracle, 4> tp_metrics(const std::vector<sentinel::EvalFrame>& frames, double thresh) {
  std::array<std::vector<std::array<double, 4>>, 4> errs;
  for (const auto& f : frames) {
    for (const auto& [pi, gi] : match(f.preds, f.gts, thresh)) {
      const Detection3D& p = f.preds[pi];
      const Detection3D& g = f.gts[gi];
      errs[static_cast<std::size_t>(g.cls)].push_back(
          {dist(p, g), 1.0 - box_iou(p.footprint, g.footprint), angle_error(p.yaw, g.yaw),
           std::fabs(p.speed - g.speed)});
    }
  }
  std::array<TpOracle, 4> out;
  for (std::size_t c = 0; c < 4; ++c) {
    out[c].n = errs[c].size();
    for (std::size_t k = 0; k < 4; ++k) {
      double s = 0.0;
      for (const auto& e : errs[c]) s += e[k];
      out[c].mean[k] = errs[c].empty() ? 0.0 : s / static_cast<double>(errs[c].size());
    }
  }
  return out;
}

inline double miou(const std::vector<double>& pred, const std::vector<double>& gt, double thr) {
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = !(pred[i] < thr);
    const bool b = !(gt[i] < thr);
    if (a && b) ++both;
    if (a || b) ++either;
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
}

// Per tick: every (pred, gt) instance pair is scored by counting cells;
// pairs above IoU 0.5 are true positives.
inline double vpq(const std::vector<std::vector<std::uint32_t>>& pred,
                  const std::vector<std::vector<std::uint32_t>>& gt) {
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    std::set<std::uint32_t> pid(pred[t].begin(), pred[t].end());
    std::set<std::uint32_t> gid(gt[t].begin(), gt[t].end());
    pid.erase(0);
    gid.erase(0);
    if (pid.empty() && gid.empty()) {
      total += 1.0;
      continue;
    }
    double iou_sum = 0.0;
    std::size_t tp = 0;
    for (std::uint32_t a : pid) {
      for (std::uint32_t b : gid) {
        std::size_t inter = 0;
        std::size_t uni = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i) {
          const bool x = pred[t][i] == a;
          const bool y = gt[t][i] == b;
          inter += x && y;
          uni += x || y;
        }
        const double iou = static_cast<double>(inter) / static_cast<double>(uni);
        if (iou > 0.5) {
          ++tp;
          iou_sum += iou;
        }
      }
    }
    const double fp = static_cast<double>(pid.size() - tp);
    const double fn = static_cast<double>(gid.size() - tp);
    total += iou_sum / (static_cast<double>(tp) + fp / 2.0 + fn / 2.0);
  }
  return total / static_cast<double>(pred.size());
}

struct ClassOracle {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Macro averages over the labels that occur in the ground truth.
inline ClassOracle classification(const std::vector<std::string>& pred, const std::vector<std::string>& gt) {
  ClassOracle o;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) hits += pred[i] == gt[i];
  o.accuracy = static_cast<double>(hits) / static_cast<double>(gt.size());
  const std::set<std::string> labels(gt.begin(), gt.end());
  for (const std::string& l : labels) {
    double tp = 0;
    double np = 0;
    double ng = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      tp += (pred[i] == l && gt[i] == l);
      np += pred[i] == l;
      ng += gt[i] == l;
    }
    const double p = np > 0 ? tp / np : 0.0;
    const double r = tp / ng;
    o.precision += p;
    o.recall += r;
    o.f1 += (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  const double n = static_cast<double>(labels.size());
  o.precision /= n;
  o.recall /= n;
  o.f1 /= n;
  return o;
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------
inline Detection3D random_box(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::uniform_real_distribution<double> size(0.5, 5.0);
  std::uniform_real_distribution<double> yaw(-3.14159, 3.14159);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Detection3D d;
  d.cls = static_cast<ObjectClass>(std::uniform_int_distribution<int>(0, 3)(rng));
  d.center = {u(rng), u(rng)};
  d.yaw = yaw(rng);
  d.footprint = {size(rng), size(rng)};
  d.confidence = unit(rng);
  d.speed = 10.0 * unit(rng);
  return d;
}

// Ground truth plus predictions that are mostly jittered copies, some
// misclassified, some spurious. Confidences are sometimes rounded so ties
// occur.
inline sentinel::EvalFrame random_frame(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.8);
  sentinel::EvalFrame f;
  const int n_gt = std::uniform_int_distribution<int>(0, 6)(rng);
  for (int i = 0; i < n_gt; ++i) f.gts.push_back(random_box(rng, 8.0));
  for (const Detection3D& g : f.gts) {
    if (unit(rng) < 0.2) continue;
    Detection3D p = g;
    p.center = {g.center.x + jitter(rng), g.center.y + jitter(rng)};
    p.yaw = g.yaw + jitter(rng);
    p.footprint = {g.footprint.length * (0.7 + 0.6 * unit(rng)), g.footprint.width * (0.7 + 0.6 * unit(rng))};
    p.speed = g.speed + jitter(rng);
    p.confidence = unit(rng);
    if (unit(rng) < 0.1) p.cls = static_cast<ObjectClass>(std::uniform_int_distribution<int>(0, 3)(rng));
    f.preds.push_back(p);
  }
  const int n_fp = std::uniform_int_distribution<int>(0, 3)(rng);
  for (int i = 0; i < n_fp; ++i) f.preds.push_back(random_box(rng, 8.0));
  if (unit(rng) < 0.3) {
    for (auto& p : f.preds) p.confidence = std::round(p.confidence * 4.0) / 4.0;
  }
  std::shuffle(f.preds.begin(), f.preds.end(), rng);
  return f;
}

}  // namespace oracle
