#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sentinel {

// ---------------------------------------------------------------------------
// Errors. Every failure mode named by a module contract has its own type so
// callers (and tests) can catch exactly what they expect.
// ---------------------------------------------------------------------------
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SENTINEL_ERROR(Name)                  \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

SENTINEL_ERROR(SchemaError);
SENTINEL_ERROR(ValidationError);
SENTINEL_ERROR(EndOfScenario);
SENTINEL_ERROR(OutOfGrid);
SENTINEL_ERROR(TickMismatch);
SENTINEL_ERROR(EmptyInput);
SENTINEL_ERROR(SpecMismatch);
SENTINEL_ERROR(MalformedMessage);
SENTINEL_ERROR(UnsupportedVersion);
SENTINEL_ERROR(MissingPerception);
SENTINEL_ERROR(EmptyQuery);
SENTINEL_ERROR(LlmTimeout);
SENTINEL_ERROR(ParseError);
SENTINEL_ERROR(TransportError);
SENTINEL_ERROR(NoGroundTruth);
SENTINEL_ERROR(LengthMismatch);
SENTINEL_ERROR(ConfigError);
SENTINEL_ERROR(IoError);
SENTINEL_ERROR(BindError);

#undef SENTINEL_ERROR

// ---------------------------------------------------------------------------
// 2D geometry primitives
// ---------------------------------------------------------------------------
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double rad);

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const Pose2&) const = default;
};

/// Rigid 2D transform p' = R(theta) p + t.
struct Rigid2 {
  Vec2 translation{};
  double rotation = 0.0;

  Vec2 apply(Vec2 p) const;
  Rigid2 inverse() const;
  bool is_identity() const { return translation.x == 0.0 && translation.y == 0.0 && rotation == 0.0; }

  /// Transform mapping a frame-local point into the frame that holds `pose`.
  static Rigid2 from_pose(const Pose2& pose) { return {{pose.x, pose.y}, pose.yaw}; }
};

Vec2 rotate(Vec2 p, double rad);

// ---------------------------------------------------------------------------
// Object taxonomy
// ---------------------------------------------------------------------------
enum class ObjectClass : std::uint8_t { Car = 0, Truck = 1, Van = 2, Pedestrian = 3 };

inline constexpr std::array<ObjectClass, 4> kAllClasses = {ObjectClass::Car, ObjectClass::Truck,
                                                           ObjectClass::Van, ObjectClass::Pedestrian};

std::string_view to_string(ObjectClass c);
/// Accepts "car", "Car", "CAR", ... Throws SchemaError on anything else.
ObjectClass class_from_string(std::string_view s);
inline std::size_t class_index(ObjectClass c) { return static_cast<std::size_t>(c); }

struct Footprint {
  double length = 0.0;
  double width = 0.0;

  double diagonal() const { return std::hypot(length, width); }
  bool operator==(const Footprint&) const = default;
};

Footprint default_footprint(ObjectClass c);

// ---------------------------------------------------------------------------
// Hashing and seeded randomness
// ---------------------------------------------------------------------------
std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Generator keyed by an ordered tuple of integers; identical keys give
/// identical streams regardless of call order or thread.
std::mt19937_64 keyed_rng(std::initializer_list<std::uint64_t> key);

inline constexpr double kPi = std::numbers::pi;

}  // namespace sentinel
