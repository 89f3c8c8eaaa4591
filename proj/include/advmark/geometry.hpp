#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace advmark::geom {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// Wraps an angle to (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

inline double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

/// Position plus heading (radians, counter-clockwise from +x).
struct Pose {
  Vec2 pos;
  double heading = 0.0;

  Vec2 forward() const { return unit(heading); }
  /// Left-hand normal of the heading; lateral offsets are positive to the left.
  Vec2 left() const { return {-std::sin(heading), std::cos(heading)}; }
  Vec2 to_world(Vec2 local) const { return pos + forward() * local.x + left() * local.y; }
  Vec2 to_local(Vec2 world) const {
    const Vec2 d = world - pos;
    return {dot(d, forward()), dot(d, left())};
  }
};

/// Oriented bounding box; half_len along the heading, half_wid along the left normal.
struct Obb {
  Pose pose;
  double half_len = 0.0;
  double half_wid = 0.0;

  std::array<Vec2, 4> corners() const {
    return {pose.to_world({half_len, half_wid}), pose.to_world({half_len, -half_wid}),
            pose.to_world({-half_len, -half_wid}), pose.to_world({-half_len, half_wid})};
  }

  bool contains(Vec2 p) const {
    const Vec2 l = pose.to_local(p);
    return std::abs(l.x) <= half_len && std::abs(l.y) <= half_wid;
  }
};

namespace detail {
inline bool separated_on_axis(const Obb& a, const Obb& b, Vec2 axis) {
  auto project = [&](const Obb& box, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const Vec2 c : box.corners()) {
      const double v = dot(c, axis);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  double alo, ahi, blo, bhi;
  project(a, alo, ahi);
  project(b, blo, bhi);
  return ahi < blo || bhi < alo;
}
}  // namespace detail

/// Separating-axis overlap test for two oriented boxes (touching counts as overlap).
inline bool obb_overlap(const Obb& a, const Obb& b) {
  const std::array<Vec2, 4> axes = {a.pose.forward(), a.pose.left(), b.pose.forward(),
                                    b.pose.left()};
  for (const Vec2 ax : axes) {
    if (detail::separated_on_axis(a, b, ax)) return false;
  }
  return true;
}

/// Proper or touching intersection of segments [a0,a1] and [b0,b1].
inline bool segments_intersect(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  const double d1 = cross(a1 - a0, b0 - a0);
  const double d2 = cross(a1 - a0, b1 - a0);
  const double d3 = cross(b1 - b0, a0 - b0);
  const double d4 = cross(b1 - b0, a1 - b0);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
    return std::min(p.x, r.x) <= q.x && q.x <= std::max(p.x, r.x) && std::min(p.y, r.y) <= q.y &&
           q.y <= std::max(p.y, r.y);
  };
  if (d1 == 0 && on_segment(a0, b0, a1)) return true;
  if (d2 == 0 && on_segment(a0, b1, a1)) return true;
  if (d3 == 0 && on_segment(b0, a0, b1)) return true;
  if (d4 == 0 && on_segment(b0, a1, b1)) return true;
  return false;
}

/// Result of projecting a point onto a path: arc length, signed lateral offset
/// (positive left of travel direction), distance to the nearest path point, and
/// whether the foot of the perpendicular fell inside the segment span.
struct Projection {
  double s = 0.0;
  double lateral = 0.0;
  double distance = std::numeric_limits<double>::infinity();
  bool within_span = false;
};

/// Piecewise path of straight segments and circular arcs, G1-continuous by
/// construction when built through PathBuilder.
class Path {
 public:
  struct Segment {
    bool is_arc = false;
    // line
    Vec2 start;
    double heading = 0.0;
    // arc
    Vec2 center;
    double radius = 0.0;
    double ang0 = 0.0;   // angle from center to the arc start
    double sweep = 0.0;  // signed; positive turns left
    double length = 0.0;
  };

  void add(Segment s) {
    total_ += s.length;
    segments_.push_back(s);
  }

  double length() const { return total_; }
  bool empty() const { return segments_.empty(); }
  const std::vector<Segment>& segments() const { return segments_; }

  Pose pose_at(double s) const {
    assert(!segments_.empty());
    s = std::clamp(s, 0.0, total_);
    double acc = 0.0;
    for (const Segment& seg : segments_) {
      if (s <= acc + seg.length || &seg == &segments_.back()) {
        return segment_pose(seg, s - acc);
      }
      acc += seg.length;
    }
    return segment_pose(segments_.back(), segments_.back().length);
  }

  Vec2 point_at(double s) const { return pose_at(s).pos; }
  double heading_at(double s) const { return pose_at(s).heading; }

  /// Nearest-point projection across all segments.
  Projection project(Vec2 p) const {
    Projection best;
    double acc = 0.0;
    for (const Segment& seg : segments_) {
      Projection cand = seg.is_arc ? project_arc(seg, p) : project_line(seg, p);
      cand.s += acc;
      // Prefer in-span projections; among candidates of the same kind pick the nearest.
      const bool better = (cand.within_span && !best.within_span) ||
                          (cand.within_span == best.within_span && cand.distance < best.distance);
      if (better) best = cand;
      acc += seg.length;
    }
    return best;
  }

  /// True when p lies within +/- half_width of the path, measured inside a segment span.
  bool band_contains(Vec2 p, double half_width) const {
    const Projection pr = project(p);
    return pr.within_span && std::abs(pr.lateral) <= half_width;
  }

 private:
  static Pose segment_pose(const Segment& seg, double local_s) {
    local_s = std::clamp(local_s, 0.0, seg.length);
    if (!seg.is_arc) {
      return {seg.start + unit(seg.heading) * local_s, seg.heading};
    }
    const double dir = seg.sweep >= 0 ? 1.0 : -1.0;
    const double a = seg.ang0 + dir * local_s / seg.radius;
    const Vec2 pos = seg.center + unit(a) * seg.radius;
    // Tangent heading: +90 deg from the radial direction for left arcs, -90 for right.
    return {pos, normalize_angle(a + dir * std::numbers::pi / 2.0)};
  }

  static Projection project_line(const Segment& seg, Vec2 p) {
    const Vec2 fwd = unit(seg.heading);
    const Vec2 d = p - seg.start;
    const double t = dot(d, fwd);
    const double tc = std::clamp(t, 0.0, seg.length);
    const Vec2 foot = seg.start + fwd * tc;
    Projection pr;
    pr.s = tc;
    pr.lateral = cross(fwd, d);  // positive left
    pr.distance = (p - foot).norm();
    pr.within_span = t >= 0.0 && t <= seg.length;
    return pr;
  }

  static Projection project_arc(const Segment& seg, Vec2 p) {
    const Vec2 v = p - seg.center;
    const double r = v.norm();
    const double ang = std::atan2(v.y, v.x);
    const double dir = seg.sweep >= 0 ? 1.0 : -1.0;
    // Angle travelled from ang0 in the sweep direction, wrapped to [0, 2pi).
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double travelled = dir * (ang - seg.ang0);
    travelled = std::fmod(travelled, two_pi);
    if (travelled < 0) travelled += two_pi;
    const double span = std::abs(seg.sweep);
    Projection pr;
    pr.within_span = travelled <= span;
    const double t = pr.within_span ? travelled : (travelled - two_pi < -span ? 0.0 : span);
    pr.s = t * seg.radius;
    // Positive lateral is left of travel: inside the circle for left arcs.
    pr.lateral = dir * (seg.radius - r);
    const Vec2 foot = seg.center + unit(seg.ang0 + dir * t) * seg.radius;
    pr.distance = (p - foot).norm();
    return pr;
  }

  std::vector<Segment> segments_;
  double total_ = 0.0;
};

/// Builds a path by chaining segments from a cursor pose.
class PathBuilder {
 public:
  explicit PathBuilder(Pose start) : cursor_(start) {}

  PathBuilder& line(double length) {
    assert(length > 0.0);
    Path::Segment seg;
    seg.is_arc = false;
    seg.start = cursor_.pos;
    seg.heading = cursor_.heading;
    seg.length = length;
    path_.add(seg);
    cursor_.pos = cursor_.pos + unit(cursor_.heading) * length;
    return *this;
  }

  /// Arc of given radius; sweep > 0 turns left, sweep < 0 turns right.
  PathBuilder& arc(double radius, double sweep) {
    assert(radius > 0.0 && sweep != 0.0);
    Path::Segment seg;
    seg.is_arc = true;
    seg.radius = radius;
    seg.sweep = sweep;
    seg.length = radius * std::abs(sweep);
    const double dir = sweep >= 0 ? 1.0 : -1.0;
    seg.center = cursor_.pos + cursor_.left() * (dir * radius);
    seg.ang0 = std::atan2(cursor_.pos.y - seg.center.y, cursor_.pos.x - seg.center.x);
    path_.add(seg);
    cursor_.pos = seg.center + unit(seg.ang0 + dir * std::abs(sweep)) * radius;
    cursor_.heading = normalize_angle(cursor_.heading + sweep);
    return *this;
  }

  Pose cursor() const { return cursor_; }
  Path build() { return std::move(path_); }

 private:
  Pose cursor_;
  Path path_;
};

}  // namespace advmark::geom
