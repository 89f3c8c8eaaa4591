#pragma once

#include <cmath>
#include <vector>

#include "advmark/command.hpp"
#include "advmark/errors.hpp"
#include "advmark/world.hpp"

namespace advmark::controller {

struct ControllerSpec {
  double dark_threshold = 0.35;
  double bright_threshold = 0.85;
  double k_p = 0.6;            // steer per meter of centroid offset
  double k_d = 0.9;            // steer per radian of cue-axis slope
  double v_target = 8.0;       // m/s
  double w_cmd = 1.0;          // branch bias blend weight
  double branch_bias = 0.9;    // added steer magnitude for turn commands
  double junction_speed = 4.0; // slow-down target while a turn is commanded
  double speed_gain = 0.4;     // throttle/brake per m/s of speed error
  double curve_slow = 1.5;     // v_ref reduction per radian of cue-axis angle

  void check() const {
    if (!(0.0 < dark_threshold && dark_threshold < bright_threshold && bright_threshold < 1.0))
      throw ConfigError("controller: thresholds must satisfy 0 < dark < bright < 1");
    if (!(k_p > 0.0) || !(k_d > 0.0) || !(v_target > 0.0) || !(speed_gain > 0.0) ||
        !(junction_speed > 0.0))
      throw ConfigError("controller: gains and speeds must be positive");
    if (w_cmd < 0.0 || w_cmd > 1.0) throw ConfigError("controller: w_cmd must be in [0,1]");
    if (branch_bias < 0.0) throw ConfigError("controller: branch_bias must be >= 0");
    if (curve_slow < 0.0) throw ConfigError("controller: curve_slow must be >= 0");
  }
};

struct Control {
  double steer = 0.0;     // [-1, 1], positive steers right
  double throttle = 0.0;  // [0, 1]
  double brake = 0.0;     // [0, 1]
  bool valid = true;      // false flags non-finite inputs; episode aborts upstream
};

namespace detail {

inline bool is_cue(float intensity, const ControllerSpec& spec) {
  return !(intensity < spec.dark_threshold) && !(intensity > spec.bright_threshold);
}

/// atan that is exactly odd, so mirrored observations negate the steer
/// bit-for-bit.
inline double odd_atan(double x) {
  if (x == 0.0) return 0.0;
  return std::copysign(std::atan(std::abs(x)), x);
}

}  // namespace detail

/// Lateral centroid (meters, positive right) of "drivable cue" pixels:
/// pavement-intensity pixels with both dark and bright pixels excluded as
/// non-drivable. The exclusion is the deliberate vulnerability: an opaque
/// dark line deletes drivable mass on its side and drags the centroid away,
/// so the controller treats painted marks as barriers.
inline double perceive(const world::Observation& obs, const ControllerSpec& spec) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < obs.rows; ++r) {
    for (int c = 0; c < obs.cols; ++c) {
      if (!detail::is_cue(obs.at(r, c), spec)) continue;
      sum += c + 0.5 - obs.cols / 2.0;
      ++count;
    }
  }
  if (count == 0) return 0.0;
  return obs.mpp_x * (sum / static_cast<double>(count));
}

/// Slope of the per-row cue centroid against distance ahead, as an angle.
/// Positive when the drivable mass bends right; acts as the heading/curve
/// feedback term.
inline double cue_axis_angle(const world::Observation& obs, const ControllerSpec& spec) {
  std::vector<double> dist;
  std::vector<double> centroid;
  for (int r = 0; r < obs.rows; ++r) {
    double sum = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < obs.cols; ++c) {
      if (!detail::is_cue(obs.at(r, c), spec)) continue;
      sum += c + 0.5 - obs.cols / 2.0;
      ++count;
    }
    if (count == 0) continue;
    dist.push_back((obs.rows - r - 0.5) * obs.mpp_y);
    centroid.push_back(obs.mpp_x * (sum / static_cast<double>(count)));
  }
  if (dist.size() < 2) return 0.0;
  const double n = static_cast<double>(dist.size());
  double dm = 0.0, cm = 0.0;
  for (double d : dist) dm += d;
  for (double c : centroid) cm += c;
  dm /= n;
  cm /= n;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    num += (dist[i] - dm) * (centroid[i] - cm);
    den += (dist[i] - dm) * (dist[i] - dm);
  }
  if (den <= 0.0) return 0.0;
  return detail::odd_atan(num / den);
}

/// steer = clamp(k_p * offset + k_d * heading + w_cmd * bias); throttle and
/// brake regulate speed toward v_target, lowered to junction_speed while a
/// turn is commanded and eased off when the cue axis bends (curve_slow).
/// Deterministic in all inputs.
inline Control act(double speed, const world::Observation& obs, Command command,
                   const ControllerSpec& spec) {
  const double offset = perceive(obs, spec);
  const double heading = cue_axis_angle(obs, spec);
  double bias = 0.0;
  if (command == Command::RightAtIntersection) bias = spec.branch_bias;
  if (command == Command::LeftAtIntersection) bias = -spec.branch_bias;

  Control out;
  const double steer = spec.k_p * offset + spec.k_d * heading + spec.w_cmd * bias;
  const bool turning =
      command == Command::RightAtIntersection || command == Command::LeftAtIntersection;
  const double ease = std::clamp(1.0 - spec.curve_slow * std::abs(heading), 0.4, 1.0);
  const double v_ref = turning ? spec.junction_speed : spec.v_target * ease;
  if (!std::isfinite(speed) || !std::isfinite(steer)) {
    out.valid = false;
    return out;
  }
  out.steer = std::clamp(steer, -1.0, 1.0);
  out.throttle = std::clamp(spec.speed_gain * (v_ref - speed), 0.0, 1.0);
  out.brake = std::clamp(spec.speed_gain * (speed - v_ref), 0.0, 1.0);
  return out;
}

}  // namespace advmark::controller
