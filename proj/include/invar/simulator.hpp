#pragma once

#include "invar/timeseries.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace invar {

/// Single tank fed by an on/off inflow pump (hysteresis on the level) and
/// drained through an on/off outflow valve that switches on a random
/// dwell schedule. Two unrelated analyzer channels are added as
/// autoregressive noise.
///
/// Channels: LIT (level), FIT_IN, FIT_OUT (flows), P_IN (pump state),
/// MV_OUT (valve state), AIT1, AIT2.
struct PlantConfig {
  double tank_area_m2 = 2.0;
  double inflow_rate = 1.0;
  double outflow_rate = 0.6;
  double level_low = 2.0;
  double level_high = 8.0;
  double initial_level = 5.0;
  double valve_min_dwell_s = 20.0;
  double valve_max_dwell_s = 120.0;
  double noise_level = 0.01;
  double noise_flow = 0.01;
  double noise_analyzer = 0.05;
  double period_s = 1.0;
  double t0 = 1'700'000'000.0;
  std::uint64_t seed = 0;

  /// Throws Error(bad_config).
  void validate() const;
};

enum class AttackKind { sensor_freeze, sensor_offset, replay, actuator_flip };

struct AttackScript {
  AttackKind kind = AttackKind::sensor_freeze;
  std::string channel;
  double start = 0.0;     // frame timestamp
  double duration = 0.0;  // seconds
  double magnitude = 0.0;
  std::string id;         // case id; generated when empty
};

std::string to_string(AttackKind kind);

/// "kind:channel:start:duration[:magnitude]" with start relative to
/// `time_origin`. Throws Error(bad_script).
AttackScript parse_attack_script(const std::string& text, double time_origin = 0.0);

Frame simulate(const PlantConfig& cfg, double duration_s, std::uint64_t seed);
inline Frame simulate(const PlantConfig& cfg, double duration_s) { return simulate(cfg, duration_s, cfg.seed); }

/// Applies a measurement attack to a copy of `frame`: freeze holds the value
/// at start, offset adds magnitude, replay copies the preceding segment of
/// equal length. Labels are set over [start, start + duration) and a case
/// is appended. actuator_flip needs the plant and is rejected here.
Frame inject(const Frame& frame, const AttackScript& script);

/// Simulates with the scripts applied. actuator_flip inverts P_IN or
/// MV_OUT over its interval and the level is re-integrated with the
/// flipped trajectory; the other kinds go through inject().
Frame simulate_scenario(const PlantConfig& cfg, double duration_s, const std::vector<AttackScript>& scripts);

}  // namespace invar
