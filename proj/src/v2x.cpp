#include "sentinel/v2x.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

namespace sentinel {

void ChannelModel::validate() const {
  if (latency_base_s < 0.0 || latency_jitter_s < 0.0 || drop_prob < 0.0 || bandwidth_bytes_per_tick < 0.0) {
    throw ValidationError("channel parameters must be non-negative");
  }
  if (drop_prob > 1.0) throw ValidationError("channel drop_prob must be <= 1");
}

std::uint8_t quantize_probability(double p) {
  const double q = std::floor(std::clamp(p, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

double dequantize_probability(std::uint8_t b) { return static_cast<double>(b) / 255.0; }

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out_.insert(out_.end(), raw, raw + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw MalformedMessage("V2X message truncated");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_message(const SensorFrame& frame, double sent_time_s) {
  const GridSpec& spec = frame.local_grid.spec();
  const std::size_t cells = frame.local_grid.cells().size();
  if (spec.cells_x > 0xffff || spec.cells_y > 0xffff) throw ValidationError("grid too large for the wire format");
  const std::size_t total = kWireHeaderBytes + frame.detections.size() * kWireDetectionBytes + kWireGridHeaderBytes +
                            cells + kWirePoseTrailerBytes;
  std::vector<std::uint8_t> out;
  out.reserve(total);
  Writer w(out);
  w.bytes("V2XM", 4);
  w.put<std::uint16_t>(kWireSchemaVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(total));
  w.put<std::uint32_t>(frame.agent_id);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(frame.tick));
  w.put<double>(sent_time_s);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(frame.detections.size()));
  for (const Detection3D& d : frame.detections) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(d.cls));
    w.put<float>(static_cast<float>(d.center.x));
    w.put<float>(static_cast<float>(d.center.y));
    w.put<float>(static_cast<float>(d.yaw));
    w.put<float>(static_cast<float>(d.footprint.length));
    w.put<float>(static_cast<float>(d.footprint.width));
    w.put<float>(static_cast<float>(d.confidence));
  }
  w.put<std::uint16_t>(static_cast<std::uint16_t>(cells == 0 ? 0 : spec.cells_x));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(cells == 0 ? 0 : spec.cells_y));
  w.put<float>(static_cast<float>(spec.resolution));
  for (double p : frame.local_grid.cells()) w.put<std::uint8_t>(quantize_probability(p));
  w.put<double>(frame.ego_pose.x);
  w.put<double>(frame.ego_pose.y);
  w.put<double>(frame.ego_pose.yaw);
  return out;
}

V2XMessage decode_message(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), "V2XM", 4) != 0) throw MalformedMessage("bad V2X magic");
  V2XMessage msg;
  msg.schema_version = r.get<std::uint16_t>();
  if (msg.schema_version != kWireSchemaVersion) {
    throw UnsupportedVersion("unsupported V2X schema version " + std::to_string(msg.schema_version));
  }
  const std::uint32_t total = r.get<std::uint32_t>();
  if (total != bytes.size()) {
    throw MalformedMessage("V2X length prefix " + std::to_string(total) + " does not match buffer size " +
                           std::to_string(bytes.size()));
  }
  msg.agent_id = r.get<std::uint32_t>();
  msg.tick = r.get<std::uint64_t>();
  msg.sent_time_s = r.get<double>();
  const std::uint32_t det_count = r.get<std::uint32_t>();
  if (static_cast<std::uint64_t>(det_count) * kWireDetectionBytes > r.remaining()) {
    throw MalformedMessage("V2X detection count exceeds payload");
  }
  SensorFrame& frame = msg.payload;
  frame.agent_id = msg.agent_id;
  frame.tick = static_cast<std::int64_t>(msg.tick);
  frame.detections.reserve(det_count);
  for (std::uint32_t i = 0; i < det_count; ++i) {
    Detection3D d;
    const std::uint8_t cls = r.get<std::uint8_t>();
    if (cls > static_cast<std::uint8_t>(ObjectClass::Pedestrian)) throw MalformedMessage("unknown object class on wire");
    d.cls = static_cast<ObjectClass>(cls);
    d.center.x = r.get<float>();
    d.center.y = r.get<float>();
    d.yaw = r.get<float>();
    d.footprint.length = r.get<float>();
    d.footprint.width = r.get<float>();
    d.confidence = r.get<float>();
    frame.detections.push_back(d);
  }
  const std::uint16_t cx = r.get<std::uint16_t>();
  const std::uint16_t cy = r.get<std::uint16_t>();
  const float res = r.get<float>();
  const std::size_t cells = static_cast<std::size_t>(cx) * cy;
  const auto raw = r.take(cells);
  if (cells > 0) {
    if (!(res > 0.0f)) throw MalformedMessage("V2X grid resolution must be positive");
    GridSpec spec;
    spec.cells_x = cx;
    spec.cells_y = cy;
    spec.resolution = res;
    BevGrid grid(spec);
    for (std::size_t i = 0; i < cells; ++i) grid.cells()[i] = dequantize_probability(raw[i]);
    frame.local_grid = std::move(grid);
  }
  frame.ego_pose.x = r.get<double>();
  frame.ego_pose.y = r.get<double>();
  frame.ego_pose.yaw = r.get<double>();
  if (r.remaining() != 0) throw MalformedMessage("trailing bytes after V2X message");
  return msg;
}

Channel::Channel(ChannelModel model, std::uint64_t seed, double tick_dt_s)
    : model_(model), seed_(seed), tick_dt_s_(tick_dt_s) {
  model_.validate();
}

std::optional<InFlight> Channel::transmit(std::vector<std::uint8_t> bytes, ActorId sender, std::uint64_t tick,
                                          double sent_time_s) {
  ++sent_;
  const std::uint64_t seq = sequence_[sender]++;
  auto rng = keyed_rng({seed_, sender, tick, seq});
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u_drop = uniform(rng);
  const double u_jitter = uniform(rng);
  if (u_drop < model_.drop_prob) {
    ++dropped_;
    return std::nullopt;
  }
  const double size = static_cast<double>(bytes.size());
  std::uint64_t slot = tick;
  while (used_bytes_[slot] > 0.0 && used_bytes_[slot] + size > model_.bandwidth_bytes_per_tick) ++slot;
  used_bytes_[slot] += size;
  while (!used_bytes_.empty() && used_bytes_.begin()->first + 4 < tick) used_bytes_.erase(used_bytes_.begin());

  double deliver = sent_time_s + model_.latency_base_s + model_.latency_jitter_s * u_jitter +
                   static_cast<double>(slot - tick) * tick_dt_s_;
  auto last = last_delivery_.find(sender);
  if (last != last_delivery_.end()) deliver = std::max(deliver, last->second);
  last_delivery_[sender] = deliver;
  ++delivered_;
  return InFlight{deliver, sender, tick, std::move(bytes)};
}

IngestBuffer::IngestBuffer(std::vector<ActorId> expected_agents, double tick_dt_s, double staleness_s)
    : expected_(std::move(expected_agents)), tick_dt_s_(tick_dt_s), staleness_s_(staleness_s) {
  std::sort(expected_.begin(), expected_.end());
}

ReadySet IngestBuffer::take(std::uint64_t tick, double now_s) {
  ReadySet set;
  set.tick = tick;
  set.fired_at_s = now_s;
  auto it = pending_.find(tick);
  if (it != pending_.end()) {
    for (auto& [agent, frame] : it->second) set.frames.push_back(std::move(frame));
    pending_.erase(it);
  }
  set.complete = std::all_of(expected_.begin(), expected_.end(), [&](ActorId a) {
    return std::any_of(set.frames.begin(), set.frames.end(), [a](const SensorFrame& f) { return f.agent_id == a; });
  });
  return set;
}

std::vector<ReadySet> IngestBuffer::fire_through(std::uint64_t tick, double now_s) {
  std::vector<ReadySet> fired;
  while (!pending_.empty() && pending_.begin()->first <= tick) {
    fired.push_back(take(pending_.begin()->first, now_s));
  }
  if (!last_fired_ || *last_fired_ < tick) last_fired_ = tick;
  return fired;
}

std::vector<ReadySet> IngestBuffer::ingest(V2XMessage msg, double now_s) {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<ReadySet> fired;
  // Deadlines that passed before this arrival fire first.
  while (!pending_.empty()) {
    const std::uint64_t t = pending_.begin()->first;
    const double deadline = static_cast<double>(t) * tick_dt_s_ + staleness_s_;
    if (now_s + 1e-12 < deadline) break;
    auto sets = fire_through(t, deadline);
    fired.insert(fired.end(), std::make_move_iterator(sets.begin()), std::make_move_iterator(sets.end()));
  }
  if (now_s - msg.sent_time_s > staleness_s_ + 1e-12) {
    ++stale_;
    return fired;
  }
  if (last_fired_ && msg.tick <= *last_fired_) {
    ++late_;
    return fired;
  }
  auto& slot = pending_[msg.tick];
  auto [it, inserted] = slot.insert_or_assign(msg.agent_id, std::move(msg.payload));
  (void)it;
  if (!inserted) ++duplicates_;
  const bool complete = std::all_of(expected_.begin(), expected_.end(), [&](ActorId a) { return slot.count(a) > 0; });
  if (complete) {
    auto sets = fire_through(msg.tick, now_s);
    fired.insert(fired.end(), std::make_move_iterator(sets.begin()), std::make_move_iterator(sets.end()));
  }
  return fired;
}

std::vector<ReadySet> IngestBuffer::poll(double now_s) {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<ReadySet> fired;
  while (!pending_.empty()) {
    const std::uint64_t t = pending_.begin()->first;
    const double deadline = static_cast<double>(t) * tick_dt_s_ + staleness_s_;
    if (now_s + 1e-12 < deadline) break;
    auto sets = fire_through(t, deadline);
    fired.insert(fired.end(), std::make_move_iterator(sets.begin()), std::make_move_iterator(sets.end()));
  }
  return fired;
}

std::uint64_t IngestBuffer::discarded_stale() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stale_;
}
std::uint64_t IngestBuffer::discarded_late() const {
  std::lock_guard<std::mutex> lock(mu_);
  return late_;
}
std::uint64_t IngestBuffer::replaced_duplicates() const {
  std::lock_guard<std::mutex> lock(mu_);
  return duplicates_;
}

}  // namespace sentinel
