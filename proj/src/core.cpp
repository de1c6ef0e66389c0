#include "sentinel/core.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <vector>

namespace sentinel {

double wrap_angle(double rad) {
  double a = std::fmod(rad, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Vec2 rotate(Vec2 p, double rad) {
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

Vec2 Rigid2::apply(Vec2 p) const {
  if (rotation == 0.0) return p + translation;
  return rotate(p, rotation) + translation;
}

Rigid2 Rigid2::inverse() const {
  const Vec2 t = rotate(translation, -rotation);
  return {{-t.x, -t.y}, -rotation};
}

std::string_view to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::Car: return "Car";
    case ObjectClass::Truck: return "Truck";
    case ObjectClass::Van: return "Van";
    case ObjectClass::Pedestrian: return "Pedestrian";
  }
  return "Car";
}

ObjectClass class_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "car") return ObjectClass::Car;
  if (lower == "truck") return ObjectClass::Truck;
  if (lower == "van") return ObjectClass::Van;
  if (lower == "pedestrian") return ObjectClass::Pedestrian;
  throw SchemaError("unknown object class '" + std::string(s) + "'");
}

Footprint default_footprint(ObjectClass c) {
  switch (c) {
    case ObjectClass::Car: return {4.0, 2.0};
    case ObjectClass::Truck: return {8.0, 2.5};
    case ObjectClass::Van: return {5.0, 2.0};
    case ObjectClass::Pedestrian: return {0.6, 0.6};
  }
  return {4.0, 2.0};
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t h) {
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::mt19937_64 keyed_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(key.size() * 2 + 1);
  words.push_back(0x5e17u);
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace sentinel
