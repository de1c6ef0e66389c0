#include "sentinel/scenario_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace sentinel {

namespace {

constexpr double kDeg = kPi / 180.0;

double heading_of(Vec2 v) { return std::atan2(v.y, v.x); }

ActorSpec actor(ActorId id, ObjectClass kind, Vec2 at, double yaw, double speed) {
  ActorSpec a;
  a.id = id;
  a.kind = kind;
  a.initial = {at.x, at.y, yaw};
  a.speed = speed;
  a.footprint = default_footprint(kind);
  return a;
}

OrientedRect building(double x0, double y0, double x1, double y1) {
  return {{0.5 * (x0 + x1), 0.5 * (y0 + y1)}, 0.0, x1 - x0, y1 - y0};
}

struct Arm {
  Vec2 out;    // unit vector from the junction centre along the arm
  Vec2 right;  // right-hand side for traffic driving in
  Vec2 left() const { return right * -1.0; }
  Vec2 at(double d, double lateral) const { return out * d + right * lateral; }
  double inbound_yaw() const { return heading_of(out * -1.0); }
  double outbound_yaw() const { return heading_of(out); }
};

Arm make_arm(Vec2 out) {
  const Vec2 in = out * -1.0;
  return {out, {in.y, -in.x}};
}

const std::vector<std::string>& query_pool() {
  static const std::vector<std::string> pool = {
      "Who would be at fault if that car pulled out?",
      "Am I going to hit anything if I keep going?",
      "Why did the car ahead stop?",
      "Is anyone running the red light?",
      "Is it safe to proceed into the junction?",
      "How is the road surface and visibility?",
      "Is there a traffic jam ahead?",
      "Describe what is happening around me.",
  };
  return pool;
}

}  // namespace

Scenario make_occlusion_scenario(std::size_t index, std::uint64_t seed) {
  std::mt19937_64 rng = keyed_rng({seed, 0x0cc1u, index});
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)); };

  Scenario sc;
  char id[32];
  std::snprintf(id, sizeof(id), "occlusion_%02zu", index);
  sc.id = id;
  sc.duration_s = 10.0;
  sc.dt_s = 0.1;
  sc.seed = seed * 1000 + index;
  sc.map_extent_m = 150.0;

  const double inset = uni(8.5, 10.0);
  const double far = 45.0;
  sc.static_occluders = {building(-far, inset, -inset, far), building(inset, inset, far, far),
                         building(-far, -far, -inset, -inset), building(inset, -far, far, -inset)};

  const std::array<Arm, 4> arms = {make_arm({-1, 0}), make_arm({1, 0}), make_arm({0, -1}), make_arm({0, 1})};

  for (std::size_t k = 0; k < 4; ++k) {
    const Arm& arm = arms[k];
    ActorSpec a = actor(static_cast<ActorId>(k + 1), ObjectClass::Car, arm.at(uni(28.0, 42.0), 2.5),
                        arm.inbound_yaw(), uni(3.5, 6.0));
    a.waypoints = {arm.at(10.0, 2.5)};
    a.agent = true;
    sc.actors.push_back(a);
  }

  ActorId next_id = 10;
  for (const Arm& arm : arms) {
    std::vector<double> slots = {16.0, 24.0, 32.0, 40.0, 48.0};
    std::shuffle(slots.begin(), slots.end(), rng);
    const std::size_t n = 1 + pick(3);
    bool walker_left = false;
    bool walker_right = false;
    bool departing = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = slots[i] + uni(-2.0, 2.0);
      const std::size_t kind = pick(3);
      if (kind == 0 || (kind == 1 && walker_left && walker_right) || (kind == 2 && departing)) {
        static constexpr std::array<ObjectClass, 3> parked = {ObjectClass::Car, ObjectClass::Van, ObjectClass::Truck};
        const ObjectClass cls = parked[pick(3)];
        sc.actors.push_back(actor(next_id++, cls, arm.at(d, -5.5), arm.outbound_yaw(), 0.0));
      } else if (kind == 1) {
        const bool left = walker_left ? false : (walker_right ? true : pick(2) == 0);
        (left ? walker_left : walker_right) = true;
        const double lateral = left ? -7.5 : 7.5;
        ActorSpec p = actor(next_id++, ObjectClass::Pedestrian, arm.at(d, lateral), 0.0, uni(1.0, 1.5));
        p.waypoints = {pick(2) == 0 ? arm.at(9.5, lateral) : arm.at(d + 15.0, lateral)};
        p.initial.yaw = heading_of(p.waypoints[0] - p.initial.position());
        sc.actors.push_back(p);
      } else {
        departing = true;
        ActorSpec c = actor(next_id++, pick(2) == 0 ? ObjectClass::Car : ObjectClass::Van,
                            arm.at(uni(12.0, 18.0), -2.5), arm.outbound_yaw(), uni(4.0, 7.0));
        c.waypoints = {arm.at(90.0, -2.5)};
        if (pick(3) == 0) c.violation_window = std::make_pair(2.0, 6.0);
        sc.actors.push_back(c);
      }
    }
  }

  std::array<std::size_t, 4> order = {0, 1, 2, 3};
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t r = 0; r < 2; ++r) {
    RsuSpec rsu;
    rsu.id = static_cast<ActorId>(101 + r);
    const Vec2 p = arms[order[r]].at(uni(20.0, 30.0), 8.2);
    rsu.pose = {p.x, p.y, 0.0};
    rsu.sensor = sc.vehicle_sensor;
    sc.rsus.push_back(rsu);
  }

  const auto& pool = query_pool();
  std::vector<std::size_t> qs(pool.size());
  for (std::size_t i = 0; i < qs.size(); ++i) qs[i] = i;
  std::shuffle(qs.begin(), qs.end(), rng);
  for (std::size_t i = 0; i < 3; ++i) sc.queries.push_back({2.0 + 3.0 * static_cast<double>(i), pool[qs[i]]});
  sc.validate();
  return sc;
}

std::vector<Scenario> make_occlusion_suite(std::size_t n, std::uint64_t seed) {
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(make_occlusion_scenario(i, seed));
  return out;
}

Scenario make_t_junction() {
  Scenario sc;
  sc.id = "occlusion_t_junction";
  sc.duration_s = 20.0;
  sc.dt_s = 0.1;
  sc.seed = 7;
  sc.map_extent_m = 150.0;
  // Main road along x, side road running south; a terrace closes the north
  // side and two blocks sit on the southern corners.
  sc.static_occluders = {building(-70.0, 9.0, 70.0, 30.0), building(-70.0, -60.0, -9.0, -9.0),
                         building(9.0, -60.0, 70.0, -9.0)};

  ActorSpec ego = actor(1, ObjectClass::Car, {2.0, -45.0}, 90.0 * kDeg, 5.0);
  ego.waypoints = {{2.0, -11.0}};
  ego.agent = true;
  ActorSpec west = actor(2, ObjectClass::Car, {-70.0, -2.5}, 0.0, 8.0);
  west.waypoints = {{90.0, -2.5}};
  west.agent = true;
  ActorSpec east = actor(3, ObjectClass::Car, {75.0, 2.5}, 180.0 * kDeg, 7.0);
  east.waypoints = {{-90.0, 2.5}};
  east.agent = true;
  ActorSpec queued = actor(4, ObjectClass::Car, {2.0, -60.0}, 90.0 * kDeg, 5.0);
  queued.waypoints = {{2.0, -18.0}};
  queued.agent = true;
  sc.actors = {ego, west, east, queued};

  sc.actors.push_back(actor(10, ObjectClass::Truck, {-30.0, -5.5}, 0.0, 0.0));
  ActorSpec van = actor(11, ObjectClass::Van, {45.0, 2.5}, 180.0 * kDeg, 9.0);
  van.waypoints = {{-90.0, 2.5}};
  van.violation_window = std::make_pair(4.0, 9.0);
  sc.actors.push_back(van);
  ActorSpec walker = actor(12, ObjectClass::Pedestrian, {-25.0, -7.5}, 0.0, 1.2);
  walker.waypoints = {{-9.5, -7.5}};
  sc.actors.push_back(walker);
  sc.actors.push_back(actor(13, ObjectClass::Van, {20.0, -5.5}, 180.0 * kDeg, 0.0));
  ActorSpec cyclist_lane = actor(14, ObjectClass::Pedestrian, {7.5, -30.0}, 90.0 * kDeg, 1.0);
  cyclist_lane.waypoints = {{7.5, -9.5}};
  sc.actors.push_back(cyclist_lane);

  RsuSpec corner{101, {-8.0, -8.0, 0.0}, sc.vehicle_sensor};
  RsuSpec north{102, {30.0, 8.0, 0.0}, sc.vehicle_sensor};
  sc.rsus = {corner, north};
  sc.queries = {{3.0, "Is it safe to turn left here?"},
                {8.0, "Why did the car ahead stop?"},
                {12.0, "Is anyone speeding or breaking the law?"}};
  sc.occlusion_tick = 70;
  sc.validate();
  return sc;
}

Scenario make_straight_road_clear() {
  Scenario sc;
  sc.id = "straight_road_clear";
  sc.duration_s = 15.0;
  sc.dt_s = 0.1;
  sc.seed = 11;
  sc.map_extent_m = 300.0;
  for (ActorId i = 0; i < 3; ++i) {
    ActorSpec a = actor(i + 1, ObjectClass::Car, {-20.0 - 25.0 * i, -2.5}, 0.0, 10.0);
    a.agent = true;
    sc.actors.push_back(a);
  }
  sc.actors.push_back(actor(10, ObjectClass::Van, {160.0, 2.5}, 180.0 * kDeg, 8.0));
  sc.actors.push_back(actor(11, ObjectClass::Truck, {260.0, 2.5}, 180.0 * kDeg, 7.0));
  ActorSpec walker = actor(12, ObjectClass::Pedestrian, {40.0, -8.0}, 0.0, 1.3);
  sc.actors.push_back(walker);
  sc.rsus = {{101, {80.0, 9.0, 0.0}, sc.vehicle_sensor}};
  sc.queries = {{5.0, "Describe the traffic situation around me."}};
  sc.validate();
  return sc;
}

Scenario make_scripted_rear_end() {
  Scenario sc;
  sc.id = "scripted_rear_end";
  sc.duration_s = 12.0;
  sc.dt_s = 0.1;
  sc.seed = 3;
  sc.map_extent_m = 200.0;
  ActorSpec ego = actor(1, ObjectClass::Car, {-60.0, -2.5}, 0.0, 12.0);
  ego.agent = true;
  ActorSpec oncoming = actor(2, ObjectClass::Car, {60.0, 2.5}, 180.0 * kDeg, 6.0);
  oncoming.agent = true;
  sc.actors = {ego, oncoming};
  sc.actors.push_back(actor(10, ObjectClass::Truck, {20.0, -2.5}, 0.0, 0.0));
  sc.actors.push_back(actor(11, ObjectClass::Pedestrian, {-10.0, -8.0}, 0.0, 1.2));
  sc.rsus = {{101, {0.0, -9.0, 0.0}, sc.vehicle_sensor}};
  sc.queries = {{2.0, "Am I going to hit the truck ahead?"}};
  sc.validate();
  return sc;
}

Scenario make_noiseless_crossing() {
  Scenario sc;
  sc.id = "noiseless_crossing";
  sc.duration_s = 8.0;
  sc.dt_s = 0.1;
  sc.seed = 5;
  sc.map_extent_m = 100.0;
  sc.vehicle_sensor = SensorConfig::noiseless();
  sc.channel.drop_prob = 0.0;
  sc.channel.latency_jitter_s = 0.0;
  ActorSpec a = actor(1, ObjectClass::Car, {-20.0, -2.5}, 0.0, 5.0);
  a.agent = true;
  ActorSpec b = actor(2, ObjectClass::Car, {20.0, 2.5}, 180.0 * kDeg, 5.0);
  b.agent = true;
  sc.actors = {a, b};
  sc.actors.push_back(actor(10, ObjectClass::Pedestrian, {0.0, -9.0}, 0.0, 0.0));
  sc.actors.push_back(actor(11, ObjectClass::Van, {-12.0, 9.0}, 0.0, 0.0));
  sc.actors.push_back(actor(12, ObjectClass::Truck, {14.0, -10.0}, 0.0, 0.0));
  sc.rsus = {{101, {0.0, 14.0, 0.0}, sc.vehicle_sensor}, {102, {0.0, -16.0, 0.0}, sc.vehicle_sensor}};
  sc.validate();
  return sc;
}

std::vector<std::pair<std::string, Scenario>> bundled_fixtures() {
  std::vector<std::pair<std::string, Scenario>> out = {
      {"occlusion_t_junction.json", make_t_junction()},
      {"straight_road_clear.json", make_straight_road_clear()},
      {"scripted_rear_end.json", make_scripted_rear_end()},
      {"noiseless_crossing.json", make_noiseless_crossing()},
  };
  for (Scenario& s : make_occlusion_suite()) out.emplace_back("occlusion_suite/" + s.id + ".json", std::move(s));
  return out;
}

void write_fixtures(const std::filesystem::path& dir) {
  for (const auto& [name, sc] : bundled_fixtures()) {
    const std::filesystem::path p = dir / name;
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write fixture '" + p.string() + "'");
    f << dump_scenario(sc);
    if (!f.flush()) throw IoError("failed writing fixture '" + p.string() + "'");
  }
}

std::vector<Scenario> load_suite(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("scenario suite directory '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (const auto& f : files) out.push_back(load_scenario_file(f.string()));
  if (out.empty()) throw IoError("scenario suite directory '" + dir.string() + "' holds no scenarios");
  return out;
}

}  // namespace sentinel
