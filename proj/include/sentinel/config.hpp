#pragma once

namespace sentinel {

/// Surround-view sensor rig of one vehicle or roadside unit.
struct SensorConfig {
  double max_range_m = 60.0;
  int camera_count = 6;
  double fov_deg = 60.0;  // per camera; cameras are spread evenly around the mount
  double sigma_pos_base_m = 0.2;
  double sigma_pos_range_coeff = 1.0 / 20.0;
  double sigma_yaw_rad = 0.05;
  double drop_prob = 0.05;
  double false_pos_rate_per_frame = 0.1;

  /// Throws ValidationError.
  void validate() const;

  /// All stochastic terms zeroed.
  static SensorConfig noiseless();
};

/// Lossy, latent V2X channel.
struct ChannelModel {
  double latency_base_s = 0.05;
  double latency_jitter_s = 0.02;  // uniform in [0, jitter]
  double drop_prob = 0.02;
  double bandwidth_bytes_per_tick = 65536.0;

  void validate() const;
};

}  // namespace sentinel
