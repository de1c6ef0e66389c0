#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "sentinel/metrics.hpp"

using namespace sentinel;

namespace {

Detection3D box(ObjectClass cls, double x, double y, double conf = 1.0) {
  Detection3D d;
  d.cls = cls;
  d.center = {x, y};
  d.footprint = {4.0, 2.0};
  d.confidence = conf;
  return d;
}

LabelRaster raster(int nx, int ny, std::vector<std::pair<int, std::uint32_t>> cells) {
  LabelRaster r{nx, ny, std::vector<std::uint32_t>(static_cast<std::size_t>(nx * ny), 0)};
  for (auto [i, id] : cells) r.labels[static_cast<std::size_t>(i)] = id;
  return r;
}

SafetyAlert alert(std::int64_t tick, std::vector<EvidenceRef> ev, bool fallback = false) {
  SafetyAlert a;
  a.tick = tick;
  a.evidence = std::move(ev);
  a.fallback = fallback;
  return a;
}

constexpr EvidenceRef::Kind kTrack = EvidenceRef::Kind::Track;
constexpr EvidenceRef::Kind kCollision = EvidenceRef::Kind::Collision;

}  // namespace

TEST(Match, Basics) {
  const std::vector<Detection3D> gts = {box(ObjectClass::Car, 0, 0), box(ObjectClass::Van, 5, 5)};
  const MatchResult same = match_detections(gts, gts);
  EXPECT_EQ(same.pairs.size(), 2u);
  for (const auto& p : same.pairs) EXPECT_EQ(p.center_dist_m, 0.0);
  const MatchResult lone = match_detections(std::vector<Detection3D>{box(ObjectClass::Car, 0, 0)}, {});
  EXPECT_EQ(lone.unmatched_preds, (std::vector<std::size_t>{0}));
}

TEST(Match, GreedyEqualsMinCostOnCraftedInstance) {
  // In index order p0 would take the middle ground truth; by confidence p1
  // takes it first, which is also the cheapest assignment.
  const std::vector<Detection3D> preds = {box(ObjectClass::Car, 0.8, 0, 0.5), box(ObjectClass::Car, 1.4, 0, 0.9),
                                          box(ObjectClass::Car, 3.1, 0, 0.7)};
  const std::vector<Detection3D> gts = {box(ObjectClass::Car, 0, 0), box(ObjectClass::Car, 1.5, 0),
                                        box(ObjectClass::Car, 3, 0)};
  std::vector<std::size_t> perm = {0, 1, 2};
  double best = 1e9;
  std::vector<std::size_t> best_perm;
  do {
    double cost = 0;
    for (std::size_t i = 0; i < 3; ++i) cost += oracle::dist(preds[i], gts[perm[i]]);
    if (cost < best) {
      best = cost;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  const MatchResult m = match_detections(preds, gts);
  ASSERT_EQ(m.pairs.size(), 3u);
  double cost = 0;
  for (const auto& p : m.pairs) {
    EXPECT_EQ(p.gt, best_perm[p.pred]);
    cost += p.center_dist_m;
  }
  EXPECT_NEAR(cost, best, 1e-12);
}

TEST(AveragePrecision, Examples) {
  const std::vector<Detection3D> gt = {box(ObjectClass::Car, 0, 0)};
  EXPECT_DOUBLE_EQ(average_precision(gt, gt), 1.0);
  const std::vector<Detection3D> fp_then_tp = {box(ObjectClass::Car, 30, 0, 0.9), box(ObjectClass::Car, 0.1, 0, 0.8)};
  EXPECT_DOUBLE_EQ(average_precision(fp_then_tp, gt), 0.5);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<Detection3D>{}, gt), 0.0);
  const std::vector<EvalFrame> none = {EvalFrame{gt, {}}};
  EXPECT_THROW(average_precision(none, ObjectClass::Car), NoGroundTruth);
  EXPECT_THROW(mean_average_precision(none), NoGroundTruth);
}

TEST(AveragePrecision, AgreesWithOracle) {
  std::mt19937_64 rng(31);
  for (int n = 0; n < 200; ++n) {
    std::vector<EvalFrame> frames;
    for (int f = 0; f < 3; ++f) frames.push_back(oracle::random_frame(rng));
    const auto expect = oracle::mean_ap(frames, kMatchThreshold);
    if (!expect) {
      EXPECT_THROW(mean_average_precision(frames), NoGroundTruth);
      continue;
    }
    EXPECT_NEAR(mean_average_precision(frames), *expect, 1e-9);
  }
}

TEST(AveragePrecision, ConfidenceRescalingInvariant) {
  std::mt19937_64 rng(2);
  for (int n = 0; n < 200; ++n) {
    std::vector<EvalFrame> frames = {oracle::random_frame(rng), oracle::random_frame(rng)};
    if (!oracle::mean_ap(frames, kMatchThreshold)) continue;
    const double base = mean_average_precision(frames);
    for (auto& f : frames) {
      for (auto& p : f.preds) p.confidence *= 0.25;
    }
    EXPECT_NEAR(mean_average_precision(frames), base, 1e-12);
  }
}

TEST(TpMetrics, Examples) {
  const std::vector<Detection3D> gts = {box(ObjectClass::Car, 0, 0)};
  const std::vector<Detection3D> same = gts;
  const auto zero = tp_metrics(match_detections(same, gts), same, gts);
  EXPECT_EQ(zero[0].cls, ObjectClass::Car);
  EXPECT_EQ(*zero[0].mate, 0.0);
  EXPECT_EQ(*zero[0].mase, 0.0);
  EXPECT_EQ(*zero[0].maoe, 0.0);
  EXPECT_EQ(*zero[0].mave, 0.0);
  EXPECT_FALSE(zero[1].mate);

  const std::vector<Detection3D> off = {box(ObjectClass::Car, 0.3, 0.4)};
  EXPECT_NEAR(*tp_metrics(match_detections(off, gts), off, gts)[0].mate, 0.5, 1e-12);
}

TEST(TpMetrics, AgreesWithOracle) {
  std::mt19937_64 rng(77);
  for (int n = 0; n < 200; ++n) {
    std::vector<EvalFrame> frames = {oracle::random_frame(rng), oracle::random_frame(rng)};
    const auto got = tp_metrics(frames);
    const auto expect = oracle::tp_metrics(frames, kMatchThreshold);
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_EQ(got[c].matches, expect[c].n);
      if (expect[c].n == 0) {
        EXPECT_FALSE(got[c].mate);
        continue;
      }
      EXPECT_NEAR(*got[c].mate, expect[c].mean[0], 1e-9);
      EXPECT_NEAR(*got[c].mase, expect[c].mean[1], 1e-9);
      EXPECT_NEAR(*got[c].maoe, expect[c].mean[2], 1e-9);
      EXPECT_NEAR(*got[c].mave, expect[c].mean[3], 1e-9);
    }
  }
}

TEST(Miou, Examples) {
  const GridSpec spec{4, 4, 1.0, {}};
  BevGrid a(spec, 0.0);
  BevGrid b(spec, 0.0);
  EXPECT_EQ(bev_miou(a, b), 1.0);
  for (int c = 0; c < 4; ++c) a.at(c, 0) = 0.9;
  for (int c = 2; c < 4; ++c) b.at(c, 0) = 0.9;
  for (int c = 0; c < 2; ++c) b.at(c, 1) = 0.9;
  EXPECT_NEAR(bev_miou(a, b), 2.0 / 6.0, 1e-12);
  EXPECT_EQ(bev_miou(a, a), 1.0);
  EXPECT_THROW(bev_miou(a, BevGrid(GridSpec{5, 4, 1.0, {}})), SpecMismatch);
}

TEST(Miou, SymmetricAndMatchesOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 200; ++n) {
    const int nx = 1 + static_cast<int>(rng() % 20);
    const int ny = 1 + static_cast<int>(rng() % 20);
    const GridSpec spec{nx, ny, 0.5, {}};
    BevGrid a(spec);
    BevGrid b(spec);
    for (double& v : a.cells()) v = u(rng);
    for (double& v : b.cells()) v = u(rng);
    EXPECT_EQ(bev_miou(a, b), bev_miou(b, a));
    EXPECT_NEAR(bev_miou(a, b), oracle::miou(a.cells(), b.cells(), kOccupancyThreshold), 1e-12);
  }
}

TEST(Vpq, Examples) {
  const std::vector<LabelRaster> perfect = {raster(4, 4, {{0, 1}, {1, 1}, {5, 2}})};
  EXPECT_EQ(motion_vpq(perfect, perfect), 1.0);
  const std::vector<LabelRaster> empty = {raster(4, 4, {})};
  EXPECT_EQ(motion_vpq(empty, empty), 1.0);
  // Prediction covers 4 of the 5 cells of instance 7; instance 9 is missed.
  const std::vector<LabelRaster> pred = {raster(4, 4, {{0, 1}, {1, 1}, {2, 1}, {3, 1}})};
  const std::vector<LabelRaster> gt = {raster(4, 4, {{0, 7}, {1, 7}, {2, 7}, {3, 7}, {4, 7}, {15, 9}})};
  EXPECT_NEAR(motion_vpq(pred, gt), 0.8 / 1.5, 1e-12);
  EXPECT_THROW(motion_vpq(pred, std::vector<LabelRaster>{}), LengthMismatch);
  EXPECT_THROW(motion_vpq(std::vector<LabelRaster>{}, std::vector<LabelRaster>{}), EmptyInput);
  EXPECT_THROW(motion_vpq(pred, std::vector<LabelRaster>{raster(3, 4, {})}), SpecMismatch);
}

TEST(Vpq, AgreesWithOracle) {
  std::mt19937_64 rng(12);
  for (int n = 0; n < 200; ++n) {
    const int nx = 2 + static_cast<int>(rng() % 19);
    const int ny = 2 + static_cast<int>(rng() % 19);
    std::vector<LabelRaster> pred;
    std::vector<LabelRaster> gt;
    std::vector<std::vector<std::uint32_t>> op;
    std::vector<std::vector<std::uint32_t>> og;
    for (int t = 0; t < 3; ++t) {
      LabelRaster g{nx, ny, std::vector<std::uint32_t>(static_cast<std::size_t>(nx * ny), 0)};
      for (auto& v : g.labels) v = static_cast<std::uint32_t>(rng() % 4 == 0 ? 1 + rng() % 4 : 0);
      LabelRaster p = g;
      for (auto& v : p.labels) {
        if (rng() % 5 == 0) v = static_cast<std::uint32_t>(rng() % 5);
      }
      op.push_back(p.labels);
      og.push_back(g.labels);
      pred.push_back(std::move(p));
      gt.push_back(std::move(g));
    }
    EXPECT_NEAR(motion_vpq(pred, gt), oracle::vpq(op, og), 1e-9);
  }
}

TEST(Classification, Examples) {
  const std::vector<std::string> gts = {"A", "A", "B"};
  const std::vector<std::string> preds = {"A", "B", "B"};
  const auto r = classification_report(preds, gts);
  EXPECT_NEAR(r.accuracy, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.precision, 0.75, 1e-12);
  EXPECT_NEAR(r.recall, 0.75, 1e-12);
  EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-12);
  const auto perfect = classification_report(gts, gts);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_THROW(classification_report(std::vector<std::string>{}, std::vector<std::string>{}), EmptyInput);
  EXPECT_THROW(classification_report(preds, std::vector<std::string>{"A"}), LengthMismatch);
}

TEST(Classification, AgreesWithOracleAndConfusionTrace) {
  std::mt19937_64 rng(44);
  const std::vector<std::string> labels = {"a", "b", "c", "d"};
  for (int n = 0; n < 200; ++n) {
    const std::size_t len = 1 + rng() % 10;
    std::vector<std::string> p;
    std::vector<std::string> g;
    for (std::size_t i = 0; i < len; ++i) {
      g.push_back(labels[rng() % 4]);
      p.push_back(rng() % 2 ? g.back() : labels[rng() % 4]);
    }
    const auto r = classification_report(p, g);
    const auto o = oracle::classification(p, g);
    EXPECT_NEAR(r.accuracy, o.accuracy, 1e-9);
    EXPECT_NEAR(r.precision, o.precision, 1e-9);
    EXPECT_NEAR(r.recall, o.recall, 1e-9);
    EXPECT_NEAR(r.f1, o.f1, 1e-9);
    std::size_t trace = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
      trace += r.confusion[i][i];
      total += std::accumulate(r.confusion[i].begin(), r.confusion[i].end(), std::size_t{0});
    }
    EXPECT_EQ(total, len);
    EXPECT_NEAR(r.accuracy, static_cast<double>(trace) / static_cast<double>(len), 1e-12);
  }
}

TEST(Rating, Buckets) {
  EvidenceIndex truth;
  truth[10] = TickEvidence{{3, 5}, {{3, 5, 2.0, {}}, {3, 7, 0.5, {}}}};
  EXPECT_EQ(rate_alert(alert(10, {{kTrack, 3, 0}, {kCollision, 3, 5}}), truth), Rating::Good);
  EXPECT_EQ(rate_alert(alert(10, {{kTrack, 3, 0}, {kCollision, 7, 3}}), truth), Rating::Middle);
  EXPECT_EQ(rate_alert(alert(10, {{kCollision, 3, 5}}), truth), Rating::Normal);
  EXPECT_EQ(rate_alert(alert(10, {{kTrack, 42, 0}}), truth), Rating::Bad);
  EXPECT_EQ(rate_alert(alert(10, {}), truth), Rating::Bad);
  EXPECT_EQ(rate_alert(alert(10, {{kTrack, 3, 0}}, true), truth), Rating::Bad);
  EXPECT_EQ(rate_alert(alert(11, {{kTrack, 3, 0}}), truth), Rating::Bad);
}

TEST(Rating, HistogramConservesCounts) {
  EvidenceIndex truth;
  truth[1] = TickEvidence{{1, 2}, {{1, 2, 3.0, {}}}};
  std::mt19937_64 rng(6);
  std::vector<SafetyAlert> alerts;
  for (int i = 0; i < 40; ++i) {
    std::vector<EvidenceRef> ev;
    if (rng() % 2) ev.push_back({kTrack, static_cast<std::uint32_t>(rng() % 4), 0});
    if (rng() % 2) ev.push_back({kCollision, 1, 2});
    SafetyAlert a = alert(static_cast<std::int64_t>(rng() % 2), ev, rng() % 7 == 0);
    a.mission = kAllMissions[rng() % kAllMissions.size()];
    alerts.push_back(a);
  }
  const RatingHistogram h = rate_alerts(alerts, truth);
  EXPECT_EQ(h.total(), 40u);
  EXPECT_EQ(h.counts.size(), 8u);
  for (Mission m : kAllMissions) {
    if (h.total(m) == 0) continue;
    double pct = 0;
    for (Rating r : kAllRatings) pct += h.percent(m, r);
    EXPECT_NEAR(pct, 100.0, 1e-9);
  }
}
