#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "sentinel/world.hpp"

namespace testutil {

inline const std::filesystem::path kData = SENTINEL_DATA_DIR;
inline const std::filesystem::path kScenarios = kData / "scenarios";

inline sentinel::ActorSpec actor(sentinel::ActorId id, sentinel::ObjectClass kind, double x, double y,
                                 double yaw = 0.0, double speed = 0.0) {
  sentinel::ActorSpec a;
  a.id = id;
  a.kind = kind;
  a.initial = {x, y, yaw};
  a.speed = speed;
  a.footprint = sentinel::default_footprint(kind);
  return a;
}

inline sentinel::Scenario scenario(std::vector<sentinel::ActorSpec> actors, double duration = 2.0) {
  sentinel::Scenario sc;
  sc.id = "unit";
  sc.duration_s = duration;
  sc.dt_s = 0.1;
  sc.seed = 7;
  sc.actors = std::move(actors);
  return sc;
}

// Fresh directory under the system temp dir, unique per process and name.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() /
                 ("sentinel_unit_" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace testutil
