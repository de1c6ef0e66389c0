#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/world.hpp"

namespace sentinel {

inline constexpr std::uint64_t kSuiteSeed = 2024;
inline constexpr std::size_t kSuiteSize = 10;

/// Four-arm intersection with buildings on every corner: one agent car per
/// arm, two roadside units and parked, walking or departing road users that
/// only some agents can see. Deterministic in (index, seed).
Scenario make_occlusion_scenario(std::size_t index, std::uint64_t seed = kSuiteSeed);
std::vector<Scenario> make_occlusion_suite(std::size_t n = kSuiteSize, std::uint64_t seed = kSuiteSeed);

Scenario make_t_junction();
Scenario make_straight_road_clear();
Scenario make_scripted_rear_end();
Scenario make_noiseless_crossing();

/// Relative file name and scenario for every bundled fixture, suite included.
std::vector<std::pair<std::string, Scenario>> bundled_fixtures();

/// Writes the bundled fixtures under `dir`. Throws IoError.
void write_fixtures(const std::filesystem::path& dir);

/// Every *.json scenario directly under `dir`, sorted by file name.
std::vector<Scenario> load_suite(const std::filesystem::path& dir);

}  // namespace sentinel
