#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "sentinel/config.hpp"
#include "sentinel/sensing.hpp"

namespace sentinel {

inline constexpr std::uint16_t kWireSchemaVersion = 1;
inline constexpr std::size_t kWireHeaderBytes = 4 + 2 + 4 + 4 + 8 + 8 + 4;
inline constexpr std::size_t kWireDetectionBytes = 1 + 6 * 4;
inline constexpr std::size_t kWireGridHeaderBytes = 2 + 2 + 4;
inline constexpr std::size_t kWirePoseTrailerBytes = 3 * 8;

struct V2XMessage {
  std::uint16_t schema_version = kWireSchemaVersion;
  ActorId agent_id = 0;
  std::uint64_t tick = 0;
  double sent_time_s = 0.0;
  SensorFrame payload;
};

/// round(p * 255), half away from zero.
std::uint8_t quantize_probability(double p);
double dequantize_probability(std::uint8_t b);

/// Little-endian layout:
///   "V2XM" | u16 version | u32 total_len | u32 agent_id | u64 tick |
///   f64 sent_time | u32 det_count | det_count x (u8 class, f32 x, y, yaw,
///   len, wid, conf) | u16 cells_x | u16 cells_y | f32 resolution |
///   cells_x*cells_y quantized cells | f64 ego_x | f64 ego_y | f64 ego_yaw
std::vector<std::uint8_t> encode_message(const SensorFrame& frame, double sent_time_s);

/// Throws MalformedMessage (bad magic, truncation, inconsistent lengths) or
/// UnsupportedVersion.
V2XMessage decode_message(std::span<const std::uint8_t> bytes);

struct InFlight {
  double deliver_at_s = 0.0;
  ActorId sender = 0;
  std::uint64_t tick = 0;
  std::vector<std::uint8_t> bytes;
};

/// Lossy latent link shared by all senders. Per-tick bandwidth is a budget;
/// messages that do not fit are pushed to the next tick's budget in arrival
/// order. Random draws are keyed by (seed, sender, tick, per-sender sequence).
class Channel {
 public:
  Channel(ChannelModel model, std::uint64_t seed, double tick_dt_s);

  std::optional<InFlight> transmit(std::vector<std::uint8_t> bytes, ActorId sender, std::uint64_t tick,
                                   double sent_time_s);

  std::uint64_t sent() const { return sent_; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t dropped() const { return dropped_; }

 private:
  ChannelModel model_;
  std::uint64_t seed_;
  double tick_dt_s_;
  std::map<std::uint64_t, double> used_bytes_;  // slot tick -> bytes
  std::map<ActorId, std::uint64_t> sequence_;
  std::map<ActorId, double> last_delivery_;
  std::uint64_t sent_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
};

/// Frames gathered for one tick.
struct ReadySet {
  std::uint64_t tick = 0;
  double fired_at_s = 0.0;
  bool complete = false;
  std::vector<SensorFrame> frames;  // sorted by agent id
};

/// Fusion-centre ingestion buffer. Producers may call `ingest` from any
/// thread; submissions are serialised. A tick fires once: when every expected
/// agent is present or when its deadline (tick time + staleness) passes.
/// When a later tick fires, earlier unfired ticks are flushed first so ready
/// sets always leave in tick order.
class IngestBuffer {
 public:
  IngestBuffer(std::vector<ActorId> expected_agents, double tick_dt_s, double staleness_s = 0.3);

  std::vector<ReadySet> ingest(V2XMessage msg, double now_s);
  std::vector<ReadySet> poll(double now_s);

  std::uint64_t discarded_stale() const;
  std::uint64_t discarded_late() const;
  std::uint64_t replaced_duplicates() const;

 private:
  std::vector<ReadySet> fire_through(std::uint64_t tick, double now_s);
  ReadySet take(std::uint64_t tick, double now_s);

  mutable std::mutex mu_;
  std::vector<ActorId> expected_;
  double tick_dt_s_;
  double staleness_s_;
  std::map<std::uint64_t, std::map<ActorId, SensorFrame>> pending_;
  std::optional<std::uint64_t> last_fired_;
  std::uint64_t stale_ = 0;
  std::uint64_t late_ = 0;
  std::uint64_t duplicates_ = 0;
};

}  // namespace sentinel
