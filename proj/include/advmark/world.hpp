#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "advmark/command.hpp"
#include "advmark/errors.hpp"
#include "advmark/geometry.hpp"
#include "advmark/pattern.hpp"

namespace advmark::world {

enum class Scenario {
  StraightRoad,
  RightTurn,
  LeftTurn,
  RightIntersection,
  LeftIntersection,
  StraightIntersection
};

/// Which leg of the T-junction the episode starts from. Non-junction
/// scenarios use None.
enum class Approach { None, Stem, BarWest, BarEast };

/// Ordered outward from the vehicle's legal lane. OutOfBounds is the wall.
enum class Region { OwnLane, OppositeLane, Offroad, OutOfBounds };

enum class Surface { Pavement, Offroad, OutOfBounds };

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::StraightRoad: return "straight_road";
    case Scenario::RightTurn: return "right_turn";
    case Scenario::LeftTurn: return "left_turn";
    case Scenario::RightIntersection: return "right_intersection";
    case Scenario::LeftIntersection: return "left_intersection";
    case Scenario::StraightIntersection: return "straight_intersection";
  }
  return "?";
}

inline Scenario scenario_from_name(const std::string& name) {
  for (Scenario s : {Scenario::StraightRoad, Scenario::RightTurn, Scenario::LeftTurn,
                     Scenario::RightIntersection, Scenario::LeftIntersection,
                     Scenario::StraightIntersection})
    if (scenario_name(s) == name) return s;
  throw ConfigError("unknown scenario: " + name);
}

inline std::string approach_name(Approach a) {
  switch (a) {
    case Approach::None: return "none";
    case Approach::Stem: return "stem";
    case Approach::BarWest: return "bar_west";
    case Approach::BarEast: return "bar_east";
  }
  return "?";
}

inline Approach approach_from_name(const std::string& name) {
  for (Approach a : {Approach::None, Approach::Stem, Approach::BarWest, Approach::BarEast})
    if (approach_name(a) == name) return a;
  throw ConfigError("unknown approach: " + name);
}

struct GeometryConfig {
  double lane_width = 3.7;          // one travel lane; full road is twice this
  double offroad_margin = 4.0;      // drivable-ish shoulder before the wall
  double straight_length = 72.0;
  double turn_radius = 80.0;        // centerline radius of the 90 degree turns
  double turn_entry = 20.0;
  double turn_exit = 20.0;
  double leg_length = 32.0;         // junction legs, measured from the junction center
  double pad_apron = 3.0;           // junction pad extends lane_width + apron
  double paint_apron = 2.0;         // center lines stop this far into the mouth
  double command_zone_radius = 3.5;
  double start_offset = 5.0;        // start pose arc distance from the leg start
  double gate_offset = 4.0;         // exit gates sit this far inside leg ends
  double min_lane_clearance = 2.0;  // vehicle width the lane must exceed

  void check() const {
    if (!(lane_width > min_lane_clearance))
      throw ConfigError("geometry: lane_width must exceed the vehicle width");
    if (!(offroad_margin > 0.0) || !(straight_length > 0.0) || !(turn_entry > 0.0) ||
        !(turn_exit > 0.0) || !(leg_length > 0.0) || !(pad_apron >= 0.0) ||
        !(command_zone_radius > 0.0) || !(start_offset > 0.0) || !(gate_offset > 0.0))
      throw ConfigError("geometry: nonpositive dimension");
    if (!(turn_radius > lane_width))
      throw ConfigError("geometry: turn_radius must exceed lane_width");
    if (leg_length <= pad_apron + lane_width + start_offset)
      throw ConfigError("geometry: leg_length too short for the junction pad");
    if (!(start_offset > gate_offset))
      throw ConfigError("geometry: start pose must sit inside the exit gates");
  }
};

struct Appearance {
  double pavement_albedo = 0.55;
  double marking_albedo = 0.95;
  double marking_width = 0.15;  // each stripe of the center double line
  double marking_gap = 0.15;    // clear pavement between the two stripes
  double offroad_albedo = 0.30;
};

/// Line across the road whose crossing ends the episode (or, for hijacks,
/// certifies the attacker's route).
struct Gate {
  std::string name;
  geom::Vec2 a;
  geom::Vec2 b;
};

/// Pose of the attack canvas: arc position along the layout centerline,
/// lateral offset (positive left), yaw relative to the local path heading,
/// and meters-per-canvas-pixel scale.
struct CanvasPlacement {
  double arc_position = 0.0;
  double lateral_offset = 0.0;
  double yaw = 0.0;
  double scale = 0.035;
  int width_px = 200;   // rasterization advice; along-track extent in canvas pixels
  int height_px = 200;  // lateral extent in canvas pixels
};

struct RoadLayout {
  Scenario scenario = Scenario::StraightRoad;
  Approach approach = Approach::None;
  GeometryConfig cfg;
  Appearance look;
  std::vector<geom::Path> corridors;  // each a two-lane band around its centerline
  geom::Path centerline;              // approach reference: start pose, slots, placement
  bool has_pad = false;
  double pad_x0 = 0.0, pad_x1 = 0.0, pad_y0 = 0.0, pad_y1 = 0.0;  // axis-aligned junction pad
  geom::Vec2 junction_center{0.0, 0.0};
  std::vector<Gate> gates;
  std::size_t goal_gate = 0;
  std::map<std::string, CanvasPlacement> slots;
  geom::Pose start_pose;

  bool in_pad(geom::Vec2 p) const {
    return has_pad && p.x >= pad_x0 && p.x <= pad_x1 && p.y >= pad_y0 && p.y <= pad_y1;
  }

  bool in_command_zone(geom::Vec2 p) const {
    return has_pad && (p - junction_center).norm() <= cfg.command_zone_radius;
  }

  Surface surface_at(geom::Vec2 p) const {
    if (in_pad(p)) return Surface::Pavement;
    bool offroad = false;
    for (const geom::Path& c : corridors) {
      const geom::Projection proj = c.project(p);
      if (!proj.within_span) continue;
      const double a = std::abs(proj.lateral);
      if (a <= cfg.lane_width) return Surface::Pavement;
      if (a <= cfg.lane_width + cfg.offroad_margin) offroad = true;
    }
    return offroad ? Surface::Offroad : Surface::OutOfBounds;
  }

  /// Own/opposite assignment is by travel direction: the lane right of each
  /// corridor centerline carries forward traffic, the left lane reverse.
  /// The junction pad is shared surface and always counts as own lane.
  Region region_at(geom::Vec2 p, double heading) const {
    if (in_pad(p)) return Region::OwnLane;
    bool on_pavement = false;
    bool own = false;
    bool offroad = false;
    for (const geom::Path& c : corridors) {
      const geom::Projection proj = c.project(p);
      if (!proj.within_span) continue;
      const double a = std::abs(proj.lateral);
      if (a <= cfg.lane_width) {
        on_pavement = true;
        const double legal = (proj.lateral <= 0.0)
                                 ? c.heading_at(proj.s)
                                 : geom::normalize_angle(c.heading_at(proj.s) + geom::kPi);
        if (std::cos(heading - legal) > 0.0) own = true;
      } else if (a <= cfg.lane_width + cfg.offroad_margin) {
        offroad = true;
      }
    }
    if (on_pavement) return own ? Region::OwnLane : Region::OppositeLane;
    if (offroad) return Region::Offroad;
    return Region::OutOfBounds;
  }

  /// Attack-free ground color. Markings are suppressed inside the pad.
  double base_albedo(geom::Vec2 p) const {
    if (in_pad(p)) return look.pavement_albedo;
    bool pavement = false;
    for (const geom::Path& c : corridors) {
      const geom::Projection proj = c.project(p);
      if (!proj.within_span) continue;
      const double a = std::abs(proj.lateral);
      if (a > cfg.lane_width) continue;
      if (a >= look.marking_gap / 2.0 && a <= look.marking_gap / 2.0 + look.marking_width)
        return look.marking_albedo;
      pavement = true;
    }
    return pavement ? look.pavement_albedo : look.offroad_albedo;
  }
};

namespace detail {

inline geom::Path leg_path(geom::Vec2 from, geom::Vec2 to) {
  const geom::Vec2 d = to - from;
  geom::PathBuilder b({from, std::atan2(d.y, d.x)});
  b.line(d.norm());
  return b.build();
}

inline Gate span_gate(std::string name, geom::Vec2 center, geom::Vec2 left_dir, double half) {
  return Gate{std::move(name), center + left_dir * half, center - left_dir * half};
}

}  // namespace detail

/// Deterministic layout for one scenario. Turn scenarios are
/// entry - 90 degree arc - exit; intersection scenarios share one T-junction
/// (stem from the south, bar west-east) and differ in approach leg and goal.
inline RoadLayout build_layout(Scenario scenario, const GeometryConfig& cfg = {},
                               const Appearance& look = {}) {
  cfg.check();
  RoadLayout out;
  out.scenario = scenario;
  out.cfg = cfg;
  out.look = look;
  const double w = cfg.lane_width;

  const auto finish_simple = [&](geom::Path path) {
    out.centerline = std::move(path);
    out.corridors = {out.centerline};
    const double gate_s = out.centerline.length() - cfg.gate_offset;
    const geom::Pose gp = out.centerline.pose_at(gate_s);
    out.gates = {detail::span_gate("goal", gp.pos, gp.left(), w)};
    out.goal_gate = 0;
    const geom::Pose sp = out.centerline.pose_at(cfg.start_offset);
    out.start_pose = {sp.pos - sp.left() * (w / 2.0), sp.heading};
  };

  switch (scenario) {
    case Scenario::StraightRoad: {
      geom::PathBuilder b({{0.0, 0.0}, 0.0});
      b.line(cfg.straight_length);
      finish_simple(b.build());
      out.slots["mid"] = {cfg.straight_length / 2.0, 0.0, 0.0, 0.05, 460, 100};
      out.slots["late"] = {cfg.straight_length - 18.0, 0.0, 0.0, 0.05, 460, 100};
      return out;
    }
    case Scenario::RightTurn:
    case Scenario::LeftTurn: {
      const double dir = (scenario == Scenario::RightTurn) ? -1.0 : 1.0;
      geom::PathBuilder b({{0.0, 0.0}, 0.0});
      b.line(cfg.turn_entry);
      b.arc(cfg.turn_radius, dir * geom::kPi / 2.0);
      b.line(cfg.turn_exit);
      finish_simple(b.build());
      const double arc_len = out.centerline.length() - cfg.turn_entry - cfg.turn_exit;
      // The entry canvas hugs the own-lane edge on the approach straight.
      // The apex canvas anchors toward the curve inside: on the arc the
      // straight canvas chord bows outward, so an outside anchor would push
      // its corners off the pavement.
      out.slots["turn-entry"] = {cfg.turn_entry - 1.5, -0.5, 0.0, 0.05, 460, 100};
      out.slots["turn-apex"] = {cfg.turn_entry + arc_len / 2.0, dir * 0.5, 0.0, 0.05, 460, 100};
      return out;
    }
    case Scenario::RightIntersection:
    case Scenario::LeftIntersection:
    case Scenario::StraightIntersection: {
      const double leg = cfg.leg_length;
      out.corridors = {detail::leg_path({-leg, 0.0}, {leg, 0.0}),   // bar, west to east
                       detail::leg_path({0.0, -leg}, {0.0, 0.0})};  // stem, south to center
      out.has_pad = true;
      const double pw = w + cfg.pad_apron;
      out.pad_x0 = -pw;
      out.pad_x1 = pw;
      out.pad_y0 = -pw;
      out.pad_y1 = w;  // the bar's far edge; nothing is paved beyond it
      out.junction_center = {0.0, 0.0};
      const double g = leg - cfg.gate_offset;
      out.gates = {detail::span_gate("west", {-g, 0.0}, {0.0, 1.0}, w),
                   detail::span_gate("east", {g, 0.0}, {0.0, 1.0}, w),
                   detail::span_gate("stem", {0.0, -g}, {1.0, 0.0}, w)};
      out.approach = (scenario == Scenario::StraightIntersection) ? Approach::BarWest
                                                                  : Approach::Stem;
      switch (out.approach) {
        case Approach::Stem: out.centerline = detail::leg_path({0.0, -leg}, {0.0, 0.0}); break;
        case Approach::BarWest: out.centerline = detail::leg_path({-leg, 0.0}, {0.0, 0.0}); break;
        case Approach::BarEast: out.centerline = detail::leg_path({leg, 0.0}, {0.0, 0.0}); break;
        case Approach::None: break;
      }
      const geom::Pose sp = out.centerline.pose_at(cfg.start_offset);
      out.start_pose = {sp.pos - sp.left() * (w / 2.0), sp.heading};
      out.slots["approach"] = {leg - 10.0, 0.0, 0.0, 0.035};
      out.slots["junction"] = {leg, 0.0, 0.0, 0.035};
      const char* goal = (scenario == Scenario::LeftIntersection) ? "west" : "east";
      for (std::size_t i = 0; i < out.gates.size(); ++i)
        if (out.gates[i].name == goal) out.goal_gate = i;
      return out;
    }
  }
  throw ConfigError("unknown scenario");
}

/// Rebuilds a junction layout for an arbitrary approach leg (hijack runs use
/// approaches that differ from the scenario defaults).
inline RoadLayout build_junction_layout(Approach approach, const GeometryConfig& cfg = {},
                                        const Appearance& look = {}) {
  if (approach == Approach::None)
    throw ConfigError("junction layout requires a concrete approach");
  RoadLayout out = build_layout(Scenario::StraightIntersection, cfg, look);
  out.approach = approach;
  const double leg = cfg.leg_length;
  switch (approach) {
    case Approach::Stem: out.centerline = detail::leg_path({0.0, -leg}, {0.0, 0.0}); break;
    case Approach::BarWest: out.centerline = detail::leg_path({-leg, 0.0}, {0.0, 0.0}); break;
    case Approach::BarEast: out.centerline = detail::leg_path({leg, 0.0}, {0.0, 0.0}); break;
    case Approach::None: break;
  }
  const geom::Pose sp = out.centerline.pose_at(cfg.start_offset);
  out.start_pose = {sp.pos - sp.left() * (cfg.lane_width / 2.0), sp.heading};
  out.slots["approach"] = {leg - 10.0, 0.0, 0.0, 0.035};
  out.slots["junction"] = {leg, 0.0, 0.0, 0.035};
  return out;
}

/// Exit gate index reached by taking `command` from the layout's approach.
/// Commands with no matching leg on the T are configuration errors.
inline std::size_t gate_toward(const RoadLayout& layout, Command command) {
  const auto find = [&](const char* name) {
    for (std::size_t i = 0; i < layout.gates.size(); ++i)
      if (layout.gates[i].name == name) return i;
    throw ConfigError(std::string("layout has no gate named ") + name);
  };
  switch (layout.approach) {
    case Approach::Stem:
      if (command == Command::LeftAtIntersection) return find("west");
      if (command == Command::RightAtIntersection) return find("east");
      break;
    case Approach::BarWest:
      if (command == Command::StraightAtIntersection) return find("east");
      if (command == Command::RightAtIntersection) return find("stem");
      break;
    case Approach::BarEast:
      if (command == Command::StraightAtIntersection) return find("west");
      if (command == Command::LeftAtIntersection) return find("stem");
      break;
    case Approach::None:
      break;
  }
  throw ConfigError("command " + command_name(command) + " has no exit from approach " +
                    approach_name(layout.approach));
}

/// Midpoint of the connection arc joining the approach's own lane to the
/// commanded exit's own lane (the fillet tangent to both lane centerlines,
/// radius = lane_width). Turn commands are issued around this point, which
/// puts the near-side turn's zone a full lane earlier along the approach
/// than the far-side turn's. Straight commands anchor at the junction
/// center; LaneFollow has no anchor.
inline std::optional<geom::Vec2> command_anchor(const RoadLayout& layout, Command command) {
  if (!layout.has_pad || command == Command::LaneFollow) return std::nullopt;
  if (command == Command::StraightAtIntersection) return layout.junction_center;
  gate_toward(layout, command);  // validates the command against the approach
  const auto travel_dir = [&](Approach ap) -> geom::Vec2 {
    switch (ap) {
      case Approach::Stem: return {0.0, 1.0};
      case Approach::BarWest: return {1.0, 0.0};
      case Approach::BarEast: return {-1.0, 0.0};
      case Approach::None: break;
    }
    throw ConfigError("command_anchor: layout has no approach");
  };
  const geom::Vec2 a = travel_dir(layout.approach);
  const std::string& exit_name = layout.gates[gate_toward(layout, command)].name;
  geom::Vec2 e{0.0, 0.0};
  if (exit_name == "west") e = {-1.0, 0.0};
  else if (exit_name == "east") e = {1.0, 0.0};
  else e = {0.0, -1.0};
  const auto right_of = [](geom::Vec2 v) { return geom::Vec2{v.y, -v.x}; };
  const double half = layout.cfg.lane_width / 2.0;
  const geom::Vec2 pa = layout.junction_center + right_of(a) * half;
  const geom::Vec2 pe = layout.junction_center + right_of(e) * half;
  const double denom = geom::cross(a, e);
  const geom::Vec2 corner = pa + a * (geom::cross(pe - pa, e) / denom);
  const double rho = layout.cfg.lane_width;
  const geom::Vec2 center = corner + (e - a) * rho;
  return center + (a - e) * (rho / (a - e).norm());
}

/// True when `command` should reach the controller at position p: turn
/// commands inside the command zone around their connection-arc anchor,
/// straight commands around the junction center.
inline bool command_active(const RoadLayout& layout, geom::Vec2 p, Command command) {
  const std::optional<geom::Vec2> anchor = command_anchor(layout, command);
  if (!anchor) return false;
  return (p - *anchor).norm() <= layout.cfg.command_zone_radius;
}

/// The attack canvas resolved into world coordinates. Canvas u (columns)
/// runs along the placement heading; canvas v (rows) runs to its right.
struct PlacedCanvas {
  pattern::Canvas canvas;
  CanvasPlacement placement;
  geom::Vec2 center;
  double angle = 0.0;  // world angle of the canvas u-axis
  double scale = 0.035;
  geom::Obb footprint;

  /// (gray, alpha) of the canvas texel covering p, or alpha 0 outside.
  std::pair<double, double> sample(geom::Vec2 p) const {
    const geom::Vec2 d = p - center;
    const geom::Vec2 u_axis{std::cos(angle), std::sin(angle)};
    const geom::Vec2 v_axis{std::sin(angle), -std::cos(angle)};
    const double u = geom::dot(d, u_axis) / scale + canvas.width / 2.0;
    const double v = geom::dot(d, v_axis) / scale + canvas.height / 2.0;
    const int px = static_cast<int>(std::floor(u));
    const int py = static_cast<int>(std::floor(v));
    if (px < 0 || px >= canvas.width || py < 0 || py >= canvas.height) return {0.0, 0.0};
    return {canvas.gray(px, py), canvas.alpha(px, py)};
  }
};

struct World {
  RoadLayout layout;
  std::optional<PlacedCanvas> placed;

  static World attack_free(RoadLayout l) { return World{std::move(l), std::nullopt}; }

  /// Ground color with the canvas alpha-composited over the road.
  double albedo_at(geom::Vec2 p) const {
    double a = layout.base_albedo(p);
    if (placed) {
      auto [gray, alpha] = placed->sample(p);
      a = alpha * gray + (1.0 - alpha) * a;
    }
    return a;
  }
};

inline World place_canvas(const RoadLayout& layout, const CanvasPlacement& placement,
                          const pattern::Canvas& canvas) {
  if (!(placement.scale > 0.0)) throw PlacementError("placement: scale must be positive");
  if (placement.arc_position < 0.0 || placement.arc_position > layout.centerline.length())
    throw PlacementError("placement: arc position outside the centerline");
  const geom::Pose anchor = layout.centerline.pose_at(placement.arc_position);
  PlacedCanvas pc;
  pc.canvas = canvas;
  pc.placement = placement;
  pc.center = anchor.pos + anchor.left() * placement.lateral_offset;
  pc.angle = geom::normalize_angle(anchor.heading + placement.yaw);
  pc.scale = placement.scale;
  const double hu = canvas.width / 2.0 * placement.scale;
  const double hv = canvas.height / 2.0 * placement.scale;
  pc.footprint = geom::Obb{{pc.center, pc.angle}, hu, hv};

  // The paved-footprint invariant is enforced on 16 perimeter points plus
  // the center; the region bands are wide relative to any sane canvas, so
  // perimeter coverage implies interior coverage.
  const auto corners = pc.footprint.corners();
  std::vector<geom::Vec2> probes{pc.center};
  for (int e = 0; e < 4; ++e) {
    const geom::Vec2 p0 = corners[static_cast<std::size_t>(e)];
    const geom::Vec2 p1 = corners[static_cast<std::size_t>((e + 1) % 4)];
    for (double t : {0.0, 0.25, 0.5, 0.75}) probes.push_back(p0 + (p1 - p0) * t);
  }
  for (const geom::Vec2& p : probes)
    if (layout.surface_at(p) != Surface::Pavement)
      throw PlacementError("placement: canvas footprint leaves the pavement");

  World w;
  w.layout = layout;
  w.placed = std::move(pc);
  return w;
}

inline World place_slot(const RoadLayout& layout, const std::string& slot,
                        const pattern::Canvas& canvas) {
  const auto it = layout.slots.find(slot);
  if (it == layout.slots.end()) throw ConfigError("layout has no slot named " + slot);
  return place_canvas(layout, it->second, canvas);
}

struct ObsConfig {
  int rows = 64;
  int cols = 64;
  double lookahead = 10.0;  // meters ahead of the vehicle
  double width = 3.7;       // lateral window span, meters
};

/// Top-down grayscale window: row 0 is farthest ahead, column 0 is the
/// vehicle's left edge of the window.
struct Observation {
  int rows = 0;
  int cols = 0;
  std::vector<float> intensity;  // row-major, values in [0,1]
  double mpp_x = 0.0;            // lateral meters per pixel
  double mpp_y = 0.0;            // longitudinal meters per pixel

  float at(int r, int c) const { return intensity[static_cast<std::size_t>(r) * cols + c]; }
  float& at(int r, int c) { return intensity[static_cast<std::size_t>(r) * cols + c]; }
};

inline Observation render(const World& world, const geom::Pose& pose,
                          const ObsConfig& cfg = {}) {
  if (cfg.rows < 1 || cfg.cols < 1 || !(cfg.lookahead > 0.0) || !(cfg.width > 0.0))
    throw ConfigError("render: bad observation config");
  Observation obs;
  obs.rows = cfg.rows;
  obs.cols = cfg.cols;
  obs.mpp_x = cfg.width / cfg.cols;
  obs.mpp_y = cfg.lookahead / cfg.rows;
  obs.intensity.resize(static_cast<std::size_t>(cfg.rows) * cfg.cols);
  const geom::Vec2 fwd = pose.forward();
  const geom::Vec2 left = pose.left();
  for (int r = 0; r < cfg.rows; ++r) {
    const double d = (cfg.rows - r - 0.5) * obs.mpp_y;
    const geom::Vec2 row_origin = pose.pos + fwd * d;
    for (int c = 0; c < cfg.cols; ++c) {
      const double lat = cfg.width / 2.0 - (c + 0.5) * obs.mpp_x;
      obs.at(r, c) = static_cast<float>(world.albedo_at(row_origin + left * lat));
    }
  }
  return obs;
}

/// Frames whose render window overlaps the canvas footprint: returns the
/// first such frame and the length of the first consecutive visible run.
/// Never visible reports (trajectory length, 0).
inline std::pair<std::size_t, std::size_t> visibility_window(
    const World& world, const std::vector<geom::Pose>& trajectory, const ObsConfig& cfg = {}) {
  if (trajectory.empty()) throw ConfigError("visibility_window: empty trajectory");
  if (!world.placed) return {trajectory.size(), 0};
  const auto window_box = [&](const geom::Pose& pose) {
    return geom::Obb{{pose.pos + pose.forward() * (cfg.lookahead / 2.0), pose.heading},
                     cfg.lookahead / 2.0, cfg.width / 2.0};
  };
  std::size_t first = trajectory.size();
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    if (geom::obb_overlap(window_box(trajectory[i]), world.placed->footprint)) {
      first = i;
      break;
    }
  }
  if (first == trajectory.size()) return {first, 0};
  std::size_t count = 0;
  for (std::size_t i = first; i < trajectory.size(); ++i) {
    if (!geom::obb_overlap(window_box(trajectory[i]), world.placed->footprint)) break;
    ++count;
  }
  return {first, count};
}

}  // namespace advmark::world
