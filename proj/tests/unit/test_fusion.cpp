#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "sentinel/fusion.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/pipeline.hpp"
#include "sentinel/scenario_gen.hpp"

using namespace sentinel;

namespace {

Detection3D det(ObjectClass cls, double x, double y, double conf = 0.9) {
  Detection3D d;
  d.cls = cls;
  d.center = {x, y};
  d.footprint = default_footprint(cls);
  d.confidence = conf;
  return d;
}

constexpr double kDeg = kPi / 180.0;

}  // namespace

TEST(GlobalFrame, Examples) {
  const Detection3D d = det(ObjectClass::Car, 1, 0);
  const Detection3D same = to_global_frame(d, {0, 0, 0});
  EXPECT_EQ(same, d);
  const Detection3D g = to_global_frame(d, {5, 0, 90 * kDeg});
  EXPECT_NEAR(g.center.x, 5.0, 1e-12);
  EXPECT_NEAR(g.center.y, 1.0, 1e-12);
  EXPECT_NEAR(g.yaw, 90 * kDeg, 1e-12);
  EXPECT_THROW(to_global_frame(d, {std::nan(""), 0, 0}), ValidationError);
}

TEST(EgoAlign, ZeroMotionIsIdentity) {
  BevGrid g(GridSpec{});
  g.at(60, 50) = 0.9;
  EXPECT_EQ(ego_align(g, 4, EgoMotion{1, 4, 5, Rigid2{}}), g);
}

TEST(EgoAlign, ForwardMotionShiftsContents) {
  BevGrid g(GridSpec{}, 0.3);
  for (int r = 0; r < 100; ++r) {
    for (int c = 0; c < 100; ++c) g.at(c, r) = 0.001 * c;
  }
  const BevGrid out = ego_align(g, 0, EgoMotion{1, 0, 1, Rigid2{{1.0, 0.0}, 0.0}});
  for (int r = 0; r < 100; ++r) {
    for (int c = 0; c < 98; ++c) ASSERT_DOUBLE_EQ(out.at(c, r), g.at(c + 2, r));
    EXPECT_EQ(out.at(98, r), kUnknownProb);
    EXPECT_EQ(out.at(99, r), kUnknownProb);
  }
}

TEST(EgoAlign, HalfTurn) {
  BevGrid g(GridSpec{}, 0.3);
  g.at(60, 50) = 0.9;
  const BevGrid out = ego_align(g, 0, EgoMotion{1, 0, 1, Rigid2{{0, 0}, kPi}});
  EXPECT_EQ(out.at(40, 50), 0.9);
  EXPECT_EQ(out.at(60, 50), 0.3);
}

TEST(EgoAlign, TickMismatch) {
  EXPECT_THROW(ego_align(BevGrid(GridSpec{}), 3, EgoMotion{1, 4, 5, Rigid2{}}), TickMismatch);
}

TEST(FuseGrids, Examples) {
  const GridSpec spec{2, 2, 0.5, {}};
  EXPECT_EQ(fuse_grids(std::vector<BevGrid>{BevGrid(spec, 0.5), BevGrid(spec, 0.5)}).at(0, 0), 0.5);
  EXPECT_NEAR(fuse_grids(std::vector<BevGrid>{BevGrid(spec, 0.8), BevGrid(spec, 0.8)}).at(1, 1), 16.0 / 17.0, 1e-12);
  EXPECT_THROW(fuse_grids(std::vector<BevGrid>{}), EmptyInput);
  EXPECT_THROW(fuse_grids(std::vector<BevGrid>{BevGrid(spec), BevGrid(GridSpec{3, 2, 0.5, {}})}), SpecMismatch);
}

TEST(FuseGrids, UnknownPaddingChangesNothing) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  const GridSpec spec{6, 4, 0.5, {}};
  for (int n = 0; n < 100; ++n) {
    std::vector<BevGrid> grids(3, BevGrid(spec));
    for (auto& g : grids) {
      for (double& v : g.cells()) v = u(rng);
    }
    const BevGrid base = fuse_grids(grids);
    grids.push_back(BevGrid(spec, 0.5));
    const BevGrid padded = fuse_grids(grids);
    for (std::size_t i = 0; i < base.cells().size(); ++i) EXPECT_NEAR(padded.cells()[i], base.cells()[i], 1e-12);
  }
}

TEST(Merge, Examples) {
  const std::vector<Detection3D> dup = {det(ObjectClass::Car, 1, 1, 0.4), det(ObjectClass::Car, 1, 1, 0.7)};
  const auto one = associate_and_merge(dup, 2.0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].confidence, 0.7);

  EXPECT_EQ(associate_and_merge(std::vector<Detection3D>{det(ObjectClass::Car, 0, 0), det(ObjectClass::Car, 3, 0)}, 2.0).size(), 2u);

  const std::vector<Detection3D> three = {det(ObjectClass::Car, 0, 0, 0.9), det(ObjectClass::Car, 1, 0, 0.6),
                                          det(ObjectClass::Car, 2, 0, 0.3)};
  const auto m = associate_and_merge(three, 2.0);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_NEAR(m[0].center.x, (0 * 0.9 + 1 * 0.6 + 2 * 0.3) / 1.8, 1e-12);
  EXPECT_DOUBLE_EQ(m[0].confidence, 0.9);
}

TEST(Merge, ClassesStaySeparate) {
  const auto m = associate_and_merge(std::vector<Detection3D>{det(ObjectClass::Car, 0, 0), det(ObjectClass::Van, 0.5, 0)}, 2.0);
  EXPECT_EQ(m.size(), 2u);
}

TEST(Merge, CountShrinksAndIsIdempotent) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int n = 0; n < 200; ++n) {
    std::vector<Detection3D> in;
    const int k = std::uniform_int_distribution<int>(0, 12)(rng);
    for (int i = 0; i < k; ++i) {
      in.push_back(det(static_cast<ObjectClass>(i % 2), u(rng), u(rng), 0.1 + std::abs(u(rng)) / 12));
    }
    const auto once = associate_and_merge(in, 2.0);
    EXPECT_LE(once.size(), in.size());
    EXPECT_EQ(associate_and_merge(once, 2.0), once);
  }
}

TEST(Tracker, SpawnAssociateAndDrop) {
  TrackerConfig cfg;
  std::uint32_t next = 1;
  auto tracks = update_tracks({}, std::vector<Detection3D>{det(ObjectClass::Car, 0, 0)}, 0.1, 0, cfg, next);
  ASSERT_EQ(tracks.size(), 1u);
  EXPECT_EQ(tracks[0].age, 0);

  Track t;
  t.id = 7;
  t.position = {0, 0};
  t.velocity = {1, 0};
  std::vector<std::uint32_t> assigned;
  std::uint32_t next2 = 8;
  auto out = update_tracks({t}, std::vector<Detection3D>{det(ObjectClass::Car, 0.1, 0)}, 0.1, 1, cfg, next2, &assigned);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(assigned[0], 7u);
  EXPECT_EQ(out[0].hits, 2);
  EXPECT_NEAR(out[0].position.x, 0.1, 1e-12);

  Track old;
  old.id = 3;
  old.age = 6;
  EXPECT_TRUE(update_tracks({old}, {}, 0.1, 2, cfg, next2).empty());
}

TEST(Tracker, AlphaBetaUpdate) {
  TrackerConfig cfg;
  Track t;
  t.id = 1;
  std::uint32_t next = 2;
  const auto out = update_tracks({t}, std::vector<Detection3D>{det(ObjectClass::Car, 1.0, 0)}, 0.5, 1, cfg, next);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].position.x, 0.6, 1e-12);
  EXPECT_NEAR(out[0].velocity.x, 0.4 / 0.5, 1e-12);
}

TEST(Forecast, Examples) {
  Track still;
  still.position = {3, 4};
  const auto fs = forecast_trajectories(std::vector<Track>{still}, 2.0, 0.5, MotionModel::CV);
  for (const auto& p : fs[0].points) {
    EXPECT_EQ(p.position, still.position);
  }
  Track mover;
  mover.velocity = {2, 0};
  const auto f = forecast_trajectories(std::vector<Track>{mover}, 2.0, 0.5, MotionModel::CV)[0];
  ASSERT_EQ(f.points.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(f.points[static_cast<std::size_t>(k)].position.x, k + 1.0, 1e-12);
    EXPECT_NEAR(f.points[static_cast<std::size_t>(k)].position.y, 0.0, 1e-12);
  }
  EXPECT_TRUE(forecast_trajectories(std::vector<Track>{mover}, 0.0, 0.5, MotionModel::CV)[0].points.empty());
}

TEST(Forecast, CtrvFollowsArc) {
  Track t;
  t.velocity = {1, 0};
  t.yaw_rate = kPi / 2;  // quarter turn per second
  const auto f = forecast_trajectories(std::vector<Track>{t}, 1.0, 0.5, MotionModel::CTRV)[0];
  const double r = 1.0 / (kPi / 2);
  EXPECT_NEAR(f.points.back().position.x, r, 1e-9);
  EXPECT_NEAR(f.points.back().position.y, r, 1e-9);
}

TEST(Collisions, Examples) {
  CollisionRadii radii{1.0, 1.0, 1.0, 1.0};
  Track a;
  a.id = 1;
  a.velocity = {10, 0};
  Track b;
  b.id = 2;
  b.position = {20, 0};
  const auto fc = forecast_trajectories(std::vector<Track>{a, b}, 5.0, 0.1, MotionModel::CV);
  const auto hits = predict_collisions(fc, radii, 5.0);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_NEAR(hits[0].ttc_s, 1.8, 1e-9);

  Track p1;
  p1.id = 1;
  p1.velocity = {5, 0};
  Track p2 = p1;
  p2.id = 2;
  p2.position = {0, 10};
  EXPECT_TRUE(predict_collisions(forecast_trajectories(std::vector<Track>{p1, p2}, 5.0, 0.1, MotionModel::CV), radii, 5.0).empty());

  Track slow;
  slow.id = 1;
  slow.velocity = {10, 0};
  Track far;
  far.id = 2;
  far.position = {64, 0};  // contact at 6.2 s
  EXPECT_TRUE(predict_collisions(forecast_trajectories(std::vector<Track>{slow, far}, 8.0, 0.1, MotionModel::CV), radii, 5.0).empty());
}

TEST(Collisions, OrderIndependent) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int n = 0; n < 50; ++n) {
    std::vector<Track> tracks;
    for (std::uint32_t i = 1; i <= 6; ++i) {
      Track t;
      t.id = i;
      t.position = {u(rng), u(rng)};
      t.velocity = {u(rng) / 4, u(rng) / 4};
      tracks.push_back(t);
    }
    auto fc = forecast_trajectories(tracks, 5.0, 0.1, MotionModel::CV);
    const auto ref = predict_collisions(fc, default_collision_radii(), 5.0);
    std::shuffle(fc.begin(), fc.end(), rng);
    const auto again = predict_collisions(fc, default_collision_radii(), 5.0);
    ASSERT_EQ(ref.size(), again.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(ref[i].track_a, again[i].track_a);
      EXPECT_EQ(ref[i].track_b, again[i].track_b);
      EXPECT_EQ(ref[i].ttc_s, again[i].ttc_s);
      EXPECT_LT(ref[i].track_a, ref[i].track_b);
    }
  }
}

TEST(Heads, EmptyInput) {
  FusionCenter fc;
  EXPECT_THROW(fc.run_heads(0, {}, {}), EmptyInput);
}

TEST(Heads, DisjointAgentsGiveUnion) {
  SensorFrame a;
  a.agent_id = 1;
  a.ego_pose = {0, 0, 0};
  a.detections = {det(ObjectClass::Car, 10, 0), det(ObjectClass::Pedestrian, 5, 5)};
  a.local_grid = BevGrid(GridSpec{});
  SensorFrame b;
  b.agent_id = 2;
  b.ego_pose = {30, 0, kPi};
  b.detections = {det(ObjectClass::Truck, 10, 3)};  // global (20, -3)
  b.local_grid = BevGrid(GridSpec{});
  FusionCenter fc;
  const PerceptionProduct p = fc.run_heads(0, std::vector<SensorFrame>{a, b}, {0, 0, 0});
  EXPECT_EQ(p.detections.size(), 3u);
  EXPECT_EQ(p.contributing_agents, (std::vector<ActorId>{1, 2}));
}

TEST(Heads, NoiselessSingleAgentIsTruth) {
  Scenario sc;
  sc.id = "solo";
  sc.duration_s = 0.5;
  sc.vehicle_sensor = SensorConfig::noiseless();
  sc.channel.drop_prob = 0.0;
  sc.channel.latency_jitter_s = 0.0;
  ActorSpec ego;
  ego.id = 1;
  ego.agent = true;
  ego.footprint = default_footprint(ObjectClass::Car);
  ActorSpec other = ego;
  other.id = 2;
  other.agent = false;
  other.initial = {12, 3, 0.3};
  ActorSpec ped = ego;
  ped.id = 3;
  ped.agent = false;
  ped.kind = ObjectClass::Pedestrian;
  ped.footprint = default_footprint(ObjectClass::Pedestrian);
  ped.initial = {-6, -4, 0};
  sc.actors = {ego, other, ped};
  const PerceptionTrace trace = simulate_perception(sc);
  std::size_t checked = 0;
  for (const TraceTick& t : trace.ticks) {
    if (!t.product) continue;
    ASSERT_EQ(t.product->detections.size(), 2u);
    for (const Detection3D& d : t.product->detections) {
      const ActorState* truth = t.world.find(d.cls == ObjectClass::Car ? 2 : 3);
      EXPECT_NEAR(d.center.x, truth->position.x, 1e-9);
      EXPECT_NEAR(d.center.y, truth->position.y, 1e-9);
      EXPECT_NEAR(d.yaw, truth->yaw, 1e-6);  // yaw travels as float32
    }
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

// At the scripted occlusion tick of the T-junction fixture the fused product
// holds an actor that the best single agent does not see.
TEST(Heads, OcclusionRecoveryOnTJunction) {
  const Scenario sc = make_t_junction();
  ASSERT_TRUE(sc.occlusion_tick);
  PerceptionOptions opts;
  opts.keep_frames = true;
  const PerceptionTrace trace = simulate_perception(sc, opts);
  const TraceTick& t = trace.ticks.at(static_cast<std::size_t>(*sc.occlusion_tick));
  ASSERT_TRUE(t.product);

  std::vector<Detection3D> gts;
  for (const ActorState& a : t.world.actors) {
    Detection3D g;
    g.cls = a.kind;
    g.center = a.position;
    gts.push_back(g);
  }
  auto seen_by = [&](const std::vector<Detection3D>& preds) {
    std::vector<bool> seen(gts.size(), false);
    for (const MatchPair& m : match_detections(preds, gts).pairs) seen[m.gt] = true;
    return seen;
  };
  const std::vector<bool> fused = seen_by(t.product->detections);
  std::size_t best_count = 0;
  std::vector<bool> best(gts.size(), false);
  for (ActorId id : sc.sensing_agent_ids()) {
    std::vector<Detection3D> own;
    for (const SensorFrame& f : t.frames) {
      if (f.agent_id != id) continue;
      for (const Detection3D& d : f.detections) own.push_back(to_global_frame(d, f.ego_pose));
    }
    const std::vector<bool> s = seen_by(own);
    const std::size_t n = static_cast<std::size_t>(std::count(s.begin(), s.end(), true));
    if (n > best_count) {
      best_count = n;
      best = s;
    }
  }
  std::size_t recovered = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) recovered += fused[i] && !best[i];
  EXPECT_GE(recovered, 1u);
}
