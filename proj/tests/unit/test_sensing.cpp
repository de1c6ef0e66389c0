#include <gtest/gtest.h>

#include <random>

#include "sentinel/sensing.hpp"
#include "test_util.hpp"

using namespace sentinel;
using testutil::actor;

namespace {

WorldState world_of(std::vector<ActorState> actors) {
  WorldState w;
  w.tick = 3;
  w.actors = std::move(actors);
  return w;
}

ActorState state(ActorId id, ObjectClass cls, double x, double y, double yaw = 0.0) {
  ActorState s;
  s.id = id;
  s.kind = cls;
  s.position = {x, y};
  s.yaw = yaw;
  s.footprint = default_footprint(cls);
  return s;
}

SensorConfig clean() {
  SensorConfig c = SensorConfig::noiseless();
  return c;
}

}  // namespace

TEST(Visibility, Examples) {
  const SensorConfig cfg;
  const Pose2 origin{0, 0, 0};
  EXPECT_TRUE(visible(origin, state(2, ObjectClass::Car, 10, 0), {}, cfg));
  const std::vector<OrientedRect> truck = {{{5, 0}, 0.0, 4.0, 2.0}};
  EXPECT_FALSE(visible(origin, state(2, ObjectClass::Car, 10, 0), truck, cfg));
  EXPECT_FALSE(visible(origin, state(2, ObjectClass::Car, 70, 0), {}, cfg));
}

TEST(Visibility, OccludersAreMonotone) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-40, 40);
  const SensorConfig cfg;
  for (int n = 0; n < 500; ++n) {
    const ActorState target = state(2, ObjectClass::Car, u(rng), u(rng));
    std::vector<OrientedRect> occ;
    bool was = visible({0, 0, 0}, target, occ, cfg);
    for (int k = 0; k < 5; ++k) {
      occ.push_back({{u(rng), u(rng)}, u(rng), 4.0, 2.0});
      const bool now = visible({0, 0, 0}, target, occ, cfg);
      EXPECT_FALSE(now && !was);
      was = now;
    }
  }
}

TEST(Sensing, NoiselessEqualsTruth) {
  const WorldState w = world_of({state(1, ObjectClass::Car, 0, 0), state(2, ObjectClass::Van, 12, 5, 0.4),
                                 state(3, ObjectClass::Pedestrian, -8, -3, 1.0)});
  const SensorAgent agent{1, {0, 0, 0.3}, clean()};
  const SensorFrame f = sense_frame(w, agent, 7);
  ASSERT_EQ(f.detections.size(), 2u);
  for (const Detection3D& d : f.detections) {
    const ActorState& truth = d.cls == ObjectClass::Van ? w.actors[1] : w.actors[2];
    const Vec2 expect = rotate(truth.position, -0.3);
    EXPECT_NEAR(d.center.x, expect.x, 1e-12);
    EXPECT_NEAR(d.center.y, expect.y, 1e-12);
    EXPECT_NEAR(d.yaw, wrap_angle(truth.yaw - 0.3), 1e-12);
    EXPECT_EQ(d.footprint, truth.footprint);
  }
}

TEST(Sensing, DropAllLeavesNoTrueDetections) {
  SensorConfig cfg;
  cfg.drop_prob = 1.0;
  cfg.false_pos_rate_per_frame = 0.0;
  const WorldState w = world_of({state(1, ObjectClass::Car, 0, 0), state(2, ObjectClass::Car, 10, 0)});
  EXPECT_TRUE(sense_frame(w, {1, {0, 0, 0}, cfg}, 7).detections.empty());
}

TEST(Sensing, SameKeySameFrame) {
  const WorldState w = world_of({state(1, ObjectClass::Car, 0, 0), state(2, ObjectClass::Car, 10, 3),
                                 state(3, ObjectClass::Truck, -20, 4)});
  const SensorAgent agent{1, {0, 0, 0}, SensorConfig{}};
  EXPECT_EQ(sense_frame(w, agent, 7), sense_frame(w, agent, 7));
  bool differs = false;
  for (std::uint64_t seed = 8; seed < 20 && !differs; ++seed) differs = !(sense_frame(w, agent, seed) == sense_frame(w, agent, 7));
  EXPECT_TRUE(differs);
}

TEST(Sensing, PositionErrorGrowsWithRange) {
  SensorConfig cfg;
  cfg.drop_prob = 0.0;
  cfg.false_pos_rate_per_frame = 0.0;
  const GridSpec tiny{2, 2, 0.5, {}};
  const std::vector<double> ranges = {5, 15, 25, 35, 45, 55};
  std::vector<double> mean_err;
  for (double r : ranges) {
    const WorldState w = world_of({state(2, ObjectClass::Pedestrian, r, 0)});
    double sum = 0.0;
    constexpr int kDraws = 2000;
    for (int s = 0; s < kDraws; ++s) {
      const SensorFrame f = sense_frame(w, {1, {0, 0, 0}, cfg}, static_cast<std::uint64_t>(s), {}, tiny);
      ASSERT_EQ(f.detections.size(), 1u);
      sum += distance(f.detections[0].center, {r, 0});
    }
    mean_err.push_back(sum / kDraws);
  }
  for (std::size_t i = 1; i < mean_err.size(); ++i) EXPECT_GE(mean_err[i], mean_err[i - 1]) << ranges[i];
}

TEST(LocalBev, EmptyFrame) {
  SensorConfig cfg;
  cfg.camera_count = 1;  // one 60 degree camera looking along +x
  SensorFrame f;
  const GridSpec spec;
  const BevGrid g = rasterize_local_bev(f, spec, cfg);
  for (int r = 0; r < spec.cells_y; ++r) {
    for (int c = 0; c < spec.cells_x; ++c) {
      const double want = in_field_of_view(cell_center({c, r}, spec), cfg) ? kFreeProb : kUnknownProb;
      ASSERT_EQ(g.at(c, r), want) << c << "," << r;
    }
  }
}

TEST(LocalBev, SingleDetectionBlock) {
  SensorFrame f;
  Detection3D d;
  d.footprint = {2.0, 2.0};
  f.detections.push_back(d);
  const BevGrid g = rasterize_local_bev(f, GridSpec{}, SensorConfig{});
  int occupied = 0;
  for (int r = 0; r < 100; ++r) {
    for (int c = 0; c < 100; ++c) {
      const bool in_block = c >= 48 && c <= 51 && r >= 48 && r <= 51;
      if (g.at(c, r) == kOccupiedProb) ++occupied;
      EXPECT_EQ(g.at(c, r) == kOccupiedProb, in_block) << c << "," << r;
    }
  }
  EXPECT_EQ(occupied, 16);
}

TEST(LocalBev, ZeroResolution) {
  EXPECT_THROW(rasterize_local_bev(SensorFrame{}, GridSpec{10, 10, 0.0, {}}), ValidationError);
}

TEST(LocalBev, ThreeValuedAndShadowed) {
  const WorldState w = world_of({state(1, ObjectClass::Car, 0, 0), state(2, ObjectClass::Truck, 10, 0),
                                 state(3, ObjectClass::Car, -6, 8, 1.0)});
  const SensorFrame f = sense_frame(w, {1, {0, 0, 0}, SensorConfig{}}, 5);
  for (double v : f.local_grid.cells()) {
    EXPECT_TRUE(v == kOccupiedProb || v == kFreeProb || v == kUnknownProb) << v;
  }
  // Directly behind the truck nothing is observed.
  const CellIndex behind = world_to_cell({20.0, 0.0}, f.local_grid.spec());
  EXPECT_EQ(f.local_grid.at(behind.col, behind.row), kUnknownProb);
}
