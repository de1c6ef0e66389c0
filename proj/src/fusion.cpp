#include "sentinel/fusion.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

namespace sentinel {

double Track::heading() const { return speed() > 0.5 ? std::atan2(velocity.y, velocity.x) : yaw; }

CollisionRadii default_collision_radii() {
  CollisionRadii r{};
  for (ObjectClass c : kAllClasses) r[class_index(c)] = 0.5 * default_footprint(c).diagonal();
  return r;
}

Detection3D to_global_frame(const Detection3D& det, const Pose2& pose) {
  if (!std::isfinite(pose.x) || !std::isfinite(pose.y) || !std::isfinite(pose.yaw) || !std::isfinite(det.center.x) ||
      !std::isfinite(det.center.y) || !std::isfinite(det.yaw)) {
    throw ValidationError("non-finite pose or detection in frame transform");
  }
  Detection3D out = det;
  out.center = rotate(det.center, pose.yaw) + pose.position();
  out.yaw = wrap_angle(det.yaw + pose.yaw);
  return out;
}

BevGrid ego_align(const BevGrid& past, std::int64_t grid_tick, const EgoMotion& motion) {
  if (grid_tick != motion.from_tick) {
    throw TickMismatch("grid captured at tick " + std::to_string(grid_tick) + " but motion starts at tick " +
                       std::to_string(motion.from_tick));
  }
  if (motion.to_tick <= motion.from_tick) throw TickMismatch("ego motion must move forward in time");
  return resample(past, past.spec(), motion.delta, kUnknownProb);
}

BevGrid project_to_common(const BevGrid& local, const Pose2& agent_pose, const GridSpec& common) {
  const Vec2 offset = rotate(common.origin - agent_pose.position(), -agent_pose.yaw) - local.spec().origin;
  return resample(local, common, Rigid2{offset, -agent_pose.yaw}, kUnknownProb);
}

namespace {

double logit_clamped(double p) {
  const double q = std::clamp(p, 0.01, 0.99);
  return std::log(q / (1.0 - q));
}

}  // namespace

BevGrid fuse_grids(std::span<const BevGrid> grids) {
  if (grids.empty()) throw EmptyInput("fuse_grids needs at least one grid");
  const GridSpec& spec = grids.front().spec();
  for (const BevGrid& g : grids) {
    if (!(g.spec() == spec)) throw SpecMismatch("fuse_grids inputs have different grid specs");
  }
  BevGrid out(spec, kUnknownProb);
  std::vector<double> terms(grids.size());
  const std::size_t n = spec.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < grids.size(); ++g) terms[g] = logit_clamped(grids[g].cells()[i]);
    // Summing in sorted order makes the result independent of input order.
    std::sort(terms.begin(), terms.end());
    double l = 0.0;
    for (double t : terms) l += t;
    out.cells()[i] = 1.0 / (1.0 + std::exp(-l));
  }
  return out;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// One single-linkage pass. Returns false when every cluster is a singleton.
bool merge_pass(const std::vector<Detection3D>& in, double gate_m, std::vector<Detection3D>& out) {
  const std::size_t n = in.size();
  DisjointSets sets(n);
  bool linked = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (in[i].cls == in[j].cls && distance(in[i].center, in[j].center) <= gate_m) {
        sets.unite(i, j);
        linked = true;
      }
    }
  }
  out.clear();
  if (!linked) {
    out = in;
    return false;
  }
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[sets.find(i)].push_back(i);
  for (const auto& members : clusters) {
    if (members.empty()) continue;
    if (members.size() == 1) {
      out.push_back(in[members.front()]);
      continue;
    }
    std::size_t best = members.front();
    double wsum = 0.0;
    Vec2 acc{};
    for (std::size_t m : members) {
      if (in[m].confidence > in[best].confidence) best = m;
      wsum += in[m].confidence;
      acc += in[m].center * in[m].confidence;
    }
    Detection3D merged = in[best];
    if (wsum > 0.0) {
      merged.center = {acc.x / wsum, acc.y / wsum};
    } else {
      Vec2 mean{};
      for (std::size_t m : members) mean += in[m].center;
      merged.center = mean * (1.0 / static_cast<double>(members.size()));
    }
    merged.confidence = in[best].confidence;
    out.push_back(merged);
  }
  return true;
}

}  // namespace

std::vector<Detection3D> associate_and_merge(std::span<const Detection3D> dets, double gate_m) {
  if (!(gate_m > 0.0)) throw ValidationError("merge gate must be positive");
  std::vector<Detection3D> current(dets.begin(), dets.end());
  std::vector<Detection3D> next;
  while (merge_pass(current, gate_m, next)) current.swap(next);
  return next;
}

std::vector<Track> update_tracks(std::vector<Track> tracks, std::span<const Detection3D> dets, double dt_s,
                                 std::int64_t tick, const TrackerConfig& cfg, std::uint32_t& next_id,
                                 std::vector<std::uint32_t>* assigned) {
  const double dt = std::max(dt_s, 0.0);
  std::vector<Vec2> predicted(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) predicted[i] = tracks[i].position + tracks[i].velocity * dt;

  struct Candidate {
    double dist;
    std::uint32_t track_id;
    std::size_t track;
    std::size_t det;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (tracks[i].cls != dets[j].cls) continue;
      const double d = distance(predicted[i], dets[j].center);
      if (d <= cfg.gate_m) candidates.push_back({d, tracks[i].id, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dist, a.track_id, a.det) < std::tie(b.dist, b.track_id, b.det);
  });

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> det_for_track(tracks.size(), kNone);
  std::vector<std::size_t> track_for_det(dets.size(), kNone);
  for (const Candidate& c : candidates) {
    if (det_for_track[c.track] != kNone || track_for_det[c.det] != kNone) continue;
    det_for_track[c.track] = c.det;
    track_for_det[c.det] = c.track;
  }

  std::vector<Track> out;
  out.reserve(tracks.size() + dets.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    Track t = std::move(tracks[i]);
    const double yaw_pred = wrap_angle(t.yaw + t.yaw_rate * dt);
    if (det_for_track[i] == kNone) {
      t.position = predicted[i];
      t.yaw = yaw_pred;
      ++t.age;
      if (t.age > cfg.max_age) continue;
      out.push_back(std::move(t));
      continue;
    }
    const Detection3D& z = dets[det_for_track[i]];
    const Vec2 residual = z.center - predicted[i];
    const double yaw_residual = wrap_angle(z.yaw - yaw_pred);
    t.position = predicted[i] + residual * cfg.alpha;
    t.yaw = wrap_angle(yaw_pred + cfg.alpha * yaw_residual);
    if (dt > 0.0) {
      t.velocity += residual * (cfg.beta / dt);
      t.yaw_rate += cfg.beta / dt * yaw_residual;
    }
    t.footprint = z.footprint;
    t.age = 0;
    ++t.hits;
    if (t.history.empty() || t.history.back().first < tick) t.history.emplace_back(tick, t.position);
    if (t.history.size() > cfg.history_len) t.history.erase(t.history.begin());
    out.push_back(std::move(t));
  }

  if (assigned != nullptr) assigned->assign(dets.size(), 0);
  for (std::size_t j = 0; j < dets.size(); ++j) {
    if (track_for_det[j] != kNone) {
      if (assigned != nullptr) (*assigned)[j] = tracks[track_for_det[j]].id;
      continue;
    }
    Track t;
    t.id = next_id++;
    t.cls = dets[j].cls;
    t.position = dets[j].center;
    t.yaw = dets[j].yaw;
    t.footprint = dets[j].footprint;
    t.history.emplace_back(tick, t.position);
    if (assigned != nullptr) (*assigned)[j] = t.id;
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  return out;
}

std::vector<TrajectoryForecast> forecast_trajectories(std::span<const Track> tracks, double horizon_s, double dt_s,
                                                      MotionModel model) {
  std::vector<TrajectoryForecast> out;
  out.reserve(tracks.size());
  const int steps = (dt_s > 0.0 && horizon_s > 0.0) ? static_cast<int>(std::floor(horizon_s / dt_s + 1e-9)) : 0;
  for (const Track& t : tracks) {
    TrajectoryForecast f;
    f.track_id = t.id;
    f.cls = t.cls;
    f.origin = t.position;
    f.model = model;
    f.points.reserve(static_cast<std::size_t>(steps));
    const double speed = t.speed();
    const double theta = t.heading();
    const bool turning = model == MotionModel::CTRV && std::abs(t.yaw_rate) > 1e-6;
    for (int k = 1; k <= steps; ++k) {
      const double tau = k * dt_s;
      Vec2 p;
      if (model == MotionModel::CV) {
        p = t.position + t.velocity * tau;
      } else if (!turning) {
        p = t.position + Vec2{std::cos(theta), std::sin(theta)} * (speed * tau);
      } else {
        const double w = t.yaw_rate;
        p = t.position + Vec2{std::sin(theta + w * tau) - std::sin(theta), std::cos(theta) - std::cos(theta + w * tau)} *
                             (speed / w);
      }
      f.points.push_back({tau, p});
    }
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

Vec2 position_at(const TrajectoryForecast& f, double t) {
  double t0 = 0.0;
  Vec2 p0 = f.origin;
  for (const ForecastPoint& fp : f.points) {
    if (t <= fp.t_s) {
      const double span = fp.t_s - t0;
      if (span <= 0.0) return fp.position;
      return p0 + (fp.position - p0) * ((t - t0) / span);
    }
    t0 = fp.t_s;
    p0 = fp.position;
  }
  return p0;
}

std::optional<std::pair<double, Vec2>> earliest_contact(const TrajectoryForecast& a, const TrajectoryForecast& b,
                                                        double reach, double horizon) {
  const double end = std::min({a.points.empty() ? 0.0 : a.points.back().t_s,
                               b.points.empty() ? 0.0 : b.points.back().t_s, horizon});
  std::vector<double> times = {0.0};
  for (const ForecastPoint& p : a.points) {
    if (p.t_s < end) times.push_back(p.t_s);
  }
  for (const ForecastPoint& p : b.points) {
    if (p.t_s < end) times.push_back(p.t_s);
  }
  times.push_back(end);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const double r2 = reach * reach;
  auto contact = [&](double t) {
    const Vec2 pa = position_at(a, t);
    const Vec2 pb = position_at(b, t);
    return std::make_pair(t, (pa + pb) * 0.5);
  };
  {
    const Vec2 d0 = position_at(b, 0.0) - position_at(a, 0.0);
    if (d0.dot(d0) <= r2) return contact(0.0);
  }
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double t0 = times[i];
    const double t1 = times[i + 1];
    const double span = t1 - t0;
    if (span <= 0.0) continue;
    const Vec2 d0 = position_at(b, t0) - position_at(a, t0);
    const Vec2 d1 = position_at(b, t1) - position_at(a, t1);
    const Vec2 w = (d1 - d0) * (1.0 / span);
    const double qa = w.dot(w);
    const double qb = 2.0 * d0.dot(w);
    const double qc = d0.dot(d0) - r2;
    if (qc <= 0.0) return contact(t0);
    if (qa <= 0.0) continue;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) continue;
    const double tau = (-qb - std::sqrt(disc)) / (2.0 * qa);
    if (tau >= 0.0 && tau <= span) return contact(t0 + tau);
  }
  return std::nullopt;
}

}  // namespace

std::vector<CollisionPrediction> predict_collisions(std::span<const TrajectoryForecast> forecasts,
                                                    const CollisionRadii& radii, double horizon_s) {
  std::vector<const TrajectoryForecast*> order;
  order.reserve(forecasts.size());
  for (const TrajectoryForecast& f : forecasts) order.push_back(&f);
  std::sort(order.begin(), order.end(),
            [](const TrajectoryForecast* a, const TrajectoryForecast* b) { return a->track_id < b->track_id; });

  std::vector<CollisionPrediction> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const TrajectoryForecast& a = *order[i];
      const TrajectoryForecast& b = *order[j];
      const double reach = radii[class_index(a.cls)] + radii[class_index(b.cls)];
      auto hit = earliest_contact(a, b, reach, horizon_s);
      if (!hit || hit->first > horizon_s) continue;
      out.push_back({a.track_id, b.track_id, hit->first, hit->second});
    }
  }
  std::sort(out.begin(), out.end(), [](const CollisionPrediction& x, const CollisionPrediction& y) {
    return std::tie(x.ttc_s, x.track_a, x.track_b) < std::tie(y.ttc_s, y.track_a, y.track_b);
  });
  return out;
}

FusionCenter::FusionCenter(HeadsConfig cfg) : cfg_(std::move(cfg)) { cfg_.fused_grid.validate(); }

PerceptionProduct FusionCenter::run_heads(std::int64_t tick, std::span<const SensorFrame> frames,
                                          const Pose2& ego_pose) {
  if (frames.empty()) throw EmptyInput("no sensor frames buffered for tick " + std::to_string(tick));

  std::vector<const SensorFrame*> ordered;
  for (const SensorFrame& f : frames) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(),
            [](const SensorFrame* a, const SensorFrame* b) { return a->agent_id < b->agent_id; });

  PerceptionProduct product;
  product.tick = tick;

  // Detection head input: every detection in the global frame.
  std::vector<Detection3D> global;
  for (const SensorFrame* f : ordered) {
    product.contributing_agents.push_back(f->agent_id);
    for (const Detection3D& d : f->detections) global.push_back(to_global_frame(d, f->ego_pose));
  }

  // BEV head: agent grids into the common frame, then temporal alignment of
  // the per-tick snapshots inside the window.
  GridSpec common = cfg_.fused_grid;
  common.origin = ego_pose.position();
  std::vector<BevGrid> layers;
  layers.reserve(ordered.size());
  for (const SensorFrame* f : ordered) {
    if (f->local_grid.cells().empty()) continue;
    layers.push_back(project_to_common(f->local_grid, f->ego_pose, common));
  }
  BevGrid snapshot = layers.empty() ? BevGrid(common, kUnknownProb) : fuse_grids(layers);

  std::vector<BevGrid> window = {snapshot};
  for (const Snapshot& past : history_) {
    if (tick - past.tick > cfg_.temporal_window || past.tick >= tick) continue;
    EgoMotion motion{0, past.tick, tick, Rigid2{common.origin - past.origin, 0.0}};
    BevGrid aligned = ego_align(past.grid, past.tick, motion);
    window.push_back(BevGrid(common, kUnknownProb));
    window.back().cells() = std::move(aligned.cells());
  }
  product.fused_grid = fuse_grids(window);
  history_.push_back({tick, common.origin, std::move(snapshot)});
  while (!history_.empty() && tick - history_.front().tick >= cfg_.temporal_window) history_.pop_front();

  // Tracking and motion heads.
  std::vector<Detection3D> merged = associate_and_merge(global, cfg_.merge_gate_m);
  const double dt = last_tick_ ? static_cast<double>(tick - *last_tick_) * cfg_.tick_dt_s : cfg_.tick_dt_s;
  last_tick_ = tick;
  std::vector<std::uint32_t> assigned;
  tracks_ = update_tracks(std::move(tracks_), merged, dt, tick, cfg_.tracker, next_track_id_, &assigned);
  for (std::size_t i = 0; i < merged.size(); ++i) {
    merged[i].track_id = assigned[i];
    for (const Track& t : tracks_) {
      if (t.id == assigned[i]) merged[i].speed = t.speed();
    }
    merged[i].peripheral = !try_world_to_cell(merged[i].center, common).has_value();
  }
  product.detections = std::move(merged);

  for (const Track& t : tracks_) {
    if (t.age == 0 && t.hits >= cfg_.tracker.min_hits) product.tracks.push_back(t);
  }
  product.forecasts = forecast_trajectories(product.tracks, cfg_.horizon_s, cfg_.forecast_dt_s, cfg_.model);
  product.collisions = predict_collisions(product.forecasts, cfg_.radii, cfg_.horizon_s);
  return product;
}

}  // namespace sentinel
