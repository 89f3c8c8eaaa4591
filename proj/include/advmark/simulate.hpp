#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "advmark/command.hpp"
#include "advmark/controller.hpp"
#include "advmark/errors.hpp"
#include "advmark/geometry.hpp"
#include "advmark/world.hpp"

namespace advmark::simulate {

struct VehicleSpec {
  double wheelbase = 2.9;      // meters
  double max_steer_deg = 35.0; // full steer deflection
  double max_accel = 3.0;      // m/s^2 at throttle 1
  double max_brake = 8.0;      // m/s^2 at brake 1
  double drag = 0.05;          // 1/s, linear speed damping
  double mass = 1500.0;        // kg
  double length = 4.5;         // footprint
  double width = 2.0;
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians in (-pi, pi], world CCW
  double speed = 0.0;    // m/s, never negative

  geom::Vec2 pos() const { return {x, y}; }
  geom::Pose pose() const { return {{x, y}, heading}; }
  geom::Obb footprint(const VehicleSpec& v) const {
    return {{{x, y}, heading}, v.length / 2.0, v.width / 2.0};
  }
};

/// Kinematic bicycle step, explicit Euler. Positive steer turns the vehicle
/// right, i.e. heading decreases in the CCW-positive world frame.
inline VehicleState step(const VehicleState& s, const controller::Control& control, double dt,
                         const VehicleSpec& v = {}) {
  if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");
  const double steer = std::clamp(control.steer, -1.0, 1.0);
  const double throttle = std::clamp(control.throttle, 0.0, 1.0);
  const double brake = std::clamp(control.brake, 0.0, 1.0);
  const double phi = steer * geom::deg_to_rad(v.max_steer_deg);

  VehicleState n = s;
  n.x = s.x + s.speed * std::cos(s.heading) * dt;
  n.y = s.y + s.speed * std::sin(s.heading) * dt;
  n.heading = geom::normalize_angle(s.heading - (s.speed / v.wheelbase) * std::tan(phi) * dt);
  const double accel = v.max_accel * throttle - v.max_brake * brake - v.drag * s.speed;
  n.speed = std::max(0.0, s.speed + accel * dt);
  return n;
}

/// Footprint area shares by region. Out-of-bounds mass counts as offroad, so
/// the three components always sum to exactly 1.
struct RegionFractions {
  double own_lane = 0.0;
  double opposite_lane = 0.0;
  double offroad = 0.0;
};

inline constexpr int kClassifyLengthSamples = 32;
inline constexpr int kClassifyWidthSamples = 16;

inline RegionFractions classify(const world::RoadLayout& layout, const VehicleState& state,
                                const VehicleSpec& v = {}) {
  const geom::Pose pose = state.pose();
  int own = 0, opp = 0, off = 0;
  for (int i = 0; i < kClassifyLengthSamples; ++i) {
    const double lx = ((i + 0.5) / kClassifyLengthSamples - 0.5) * v.length;
    for (int j = 0; j < kClassifyWidthSamples; ++j) {
      const double ly = ((j + 0.5) / kClassifyWidthSamples - 0.5) * v.width;
      switch (layout.region_at(pose.to_world({lx, ly}), state.heading)) {
        case world::Region::OwnLane: ++own; break;
        case world::Region::OppositeLane: ++opp; break;
        default: ++off; break;
      }
    }
  }
  const double total = kClassifyLengthSamples * kClassifyWidthSamples;
  return {own / total, opp / total, off / total};
}

namespace detail {

/// True when any sampled footprint perimeter point (or the center) lies
/// strictly beyond the offroad margin.
inline bool wall_contact(const world::RoadLayout& layout, const VehicleState& state,
                         const VehicleSpec& v) {
  if (layout.surface_at(state.pos()) == world::Surface::OutOfBounds) return true;
  const auto corners = state.footprint(v).corners();
  for (int e = 0; e < 4; ++e) {
    const geom::Vec2 a = corners[static_cast<std::size_t>(e)];
    const geom::Vec2 b = corners[static_cast<std::size_t>((e + 1) % 4)];
    const int n = (e % 2 == 0) ? 32 : 16;  // long edges first per corners() order
    for (int k = 0; k <= n; ++k) {
      const geom::Vec2 p = a + (b - a) * (static_cast<double>(k) / n);
      if (layout.surface_at(p) == world::Surface::OutOfBounds) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Impact magnitude when the footprint first reaches the wall between the
/// two states: vehicle mass times entry speed, else 0. A tangent graze that
/// never goes strictly beyond the boundary reports no collision.
inline double collision_check(const world::RoadLayout& layout, const VehicleState& prev,
                              const VehicleState& state, const VehicleSpec& v = {}) {
  if (!detail::wall_contact(layout, state, v)) return 0.0;
  if (detail::wall_contact(layout, prev, v)) return 0.0;
  return v.mass * prev.speed;
}

struct Frame {
  int index = 0;
  VehicleState state;  // at frame start, before this frame's step
  controller::Control control;
  RegionFractions regions;
  double collision = 0.0;  // kg*m/s, nonzero only on the terminal frame
};

struct EpisodeTrace {
  std::vector<Frame> frames;
  double dt = 0.1;
  world::Scenario scenario = world::Scenario::StraightRoad;
  Command command = Command::LaneFollow;
  bool reached_goal = false;
  int crossed_gate = -1;  // index into layout.gates, -1 if none
  std::string end_reason; // goal | gate | collision | max_frames

  std::vector<geom::Pose> poses() const {
    std::vector<geom::Pose> out;
    out.reserve(frames.size());
    for (const Frame& f : frames) out.push_back(f.state.pose());
    return out;
  }
  std::vector<double> steering() const {
    std::vector<double> out;
    out.reserve(frames.size());
    for (const Frame& f : frames) out.push_back(f.control.steer);
    return out;
  }
  std::vector<geom::Vec2> path() const {
    std::vector<geom::Vec2> out;
    out.reserve(frames.size());
    for (const Frame& f : frames) out.push_back(f.state.pos());
    return out;
  }
};

struct SimConfig {
  double dt = 0.1;
  int max_frames = 100;
  double start_speed = 8.0;
  VehicleSpec vehicle;
  world::ObsConfig obs{64, 64, 10.0, 0.0};  // width 0 resolves per run_episode
};

/// Forward window width when SimConfig leaves it unset. One lane: the
/// centroid of the drivable band is only sensitive to lateral error while
/// the window stays inside the own lane; widening it past the center
/// marking dilutes the cue with opposite-lane pavement.
inline constexpr double kWindowLaneFactor = 1.0;

/// Closed-loop episode: render, act, clamp, step, score. Ends on wall
/// contact, on crossing any exit gate (hijacked runs leave by a different
/// gate than the goal), or after max_frames. Intersection commands reach the
/// controller only inside the junction's command zone.
inline EpisodeTrace run_episode(const world::World& w, const controller::ControllerSpec& cspec,
                                Command command, const SimConfig& config = {}) {
  if (config.max_frames <= 0) throw ConfigError("run_episode: max_frames must be positive");
  if (!(config.dt > 0.0)) throw ConfigError("run_episode: dt must be positive");
  cspec.check();
  const world::RoadLayout& layout = w.layout;
  world::ObsConfig obs_cfg = config.obs;
  if (obs_cfg.width <= 0.0) obs_cfg.width = kWindowLaneFactor * layout.cfg.lane_width;

  EpisodeTrace trace;
  trace.dt = config.dt;
  trace.scenario = layout.scenario;
  trace.command = command;

  VehicleState state;
  state.x = layout.start_pose.pos.x;
  state.y = layout.start_pose.pos.y;
  state.heading = layout.start_pose.heading;
  state.speed = config.start_speed;

  for (int i = 0; i < config.max_frames; ++i) {
    const world::Observation obs = world::render(w, state.pose(), obs_cfg);
    const Command effective =
        world::command_active(layout, state.pos(), command) ? command : Command::LaneFollow;
    controller::Control control = controller::act(state.speed, obs, effective, cspec);
    if (!control.valid || !std::isfinite(control.steer) || !std::isfinite(control.throttle) ||
        !std::isfinite(control.brake))
      throw RuntimeFailure("run_episode: controller produced non-finite control at frame " +
                           std::to_string(i));
    control.steer = std::clamp(control.steer, -1.0, 1.0);
    control.throttle = std::clamp(control.throttle, 0.0, 1.0);
    control.brake = std::clamp(control.brake, 0.0, 1.0);

    Frame frame;
    frame.index = i;
    frame.state = state;
    frame.control = control;
    frame.regions = classify(layout, state, config.vehicle);

    const VehicleState next = step(state, control, config.dt, config.vehicle);

    // Gate crossings win over collisions within the same step: the episode
    // ends at the gate, so the corridor needs no pavement beyond it.
    int crossed = -1;
    for (std::size_t g = 0; g < layout.gates.size(); ++g) {
      if (geom::segments_intersect(state.pos(), next.pos(), layout.gates[g].a,
                                   layout.gates[g].b)) {
        crossed = static_cast<int>(g);
        break;
      }
    }
    if (crossed >= 0) {
      trace.frames.push_back(frame);
      trace.crossed_gate = crossed;
      trace.reached_goal = (static_cast<std::size_t>(crossed) == layout.goal_gate);
      trace.end_reason = trace.reached_goal ? "goal" : "gate";
      return trace;
    }

    frame.collision = collision_check(layout, state, next, config.vehicle);
    trace.frames.push_back(frame);
    if (frame.collision > 0.0) {
      trace.end_reason = "collision";
      return trace;
    }
    state = next;
  }
  trace.end_reason = "max_frames";
  return trace;
}

enum class Severity { Safe, OppositeLane, Offroad, Collision };

inline std::string severity_name(Severity s) {
  switch (s) {
    case Severity::Safe: return "safe";
    case Severity::OppositeLane: return "opposite_lane";
    case Severity::Offroad: return "offroad";
    case Severity::Collision: return "collision";
  }
  return "?";
}

inline Severity severity_from_name(const std::string& name) {
  for (Severity s :
       {Severity::Safe, Severity::OppositeLane, Severity::Offroad, Severity::Collision})
    if (severity_name(s) == name) return s;
  throw ConfigError("unknown severity: " + name);
}

/// Measures must exceed their threshold to register; Safe means all three
/// are zero to within 1e-12.
struct SeverityThresholds {
  double opposite = 0.0;
  double offroad = 0.0;
  double collision = 0.0;
};

struct InfractionReport {
  double mean_opposite = 0.0;          // mean footprint fraction over frames
  double mean_offroad = 0.0;
  double collision_intensity = 0.0;    // kg*m/s, summed
  double normalized_collision = 0.0;   // intensity / (mass * v_target)
  Severity severity = Severity::Safe;
};

inline InfractionReport infractions(const EpisodeTrace& trace, const VehicleSpec& vehicle = {},
                                    double v_target = 8.0,
                                    const SeverityThresholds& thresholds = {}) {
  if (trace.frames.empty()) throw ConfigError("infractions: empty trace");
  InfractionReport rep;
  for (const Frame& f : trace.frames) {
    rep.mean_opposite += f.regions.opposite_lane;
    rep.mean_offroad += f.regions.offroad;
    rep.collision_intensity += f.collision;
  }
  const double n = static_cast<double>(trace.frames.size());
  rep.mean_opposite /= n;
  rep.mean_offroad /= n;
  rep.normalized_collision = rep.collision_intensity / (vehicle.mass * v_target);

  constexpr double kZero = 1e-12;
  if (rep.collision_intensity > std::max(thresholds.collision, kZero))
    rep.severity = Severity::Collision;
  else if (rep.mean_offroad > std::max(thresholds.offroad, kZero))
    rep.severity = Severity::Offroad;
  else if (rep.mean_opposite > std::max(thresholds.opposite, kZero))
    rep.severity = Severity::OppositeLane;
  else
    rep.severity = Severity::Safe;
  return rep;
}

}  // namespace advmark::simulate
