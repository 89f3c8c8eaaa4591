#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "advmark/errors.hpp"
#include "advmark/geometry.hpp"

namespace advmark::objective {

/// All kinds are maximized by the search layer; minimizing forms are negated
/// here (CollideLeft, HijackDistance).
enum class Kind { CollideRight, CollideLeft, AbsSteerDiff, PathDeviation, HijackDistance };

inline std::string kind_name(Kind k) {
  switch (k) {
    case Kind::CollideRight: return "collide_right";
    case Kind::CollideLeft: return "collide_left";
    case Kind::AbsSteerDiff: return "abs_steer_diff";
    case Kind::PathDeviation: return "path_deviation";
    case Kind::HijackDistance: return "hijack_distance";
  }
  return "?";
}

inline Kind kind_from_name(const std::string& name) {
  for (Kind k : {Kind::CollideRight, Kind::CollideLeft, Kind::AbsSteerDiff,
                 Kind::PathDeviation, Kind::HijackDistance})
    if (kind_name(k) == name) return k;
  throw ConfigError("unknown objective: " + name);
}

inline bool needs_baseline(Kind k) {
  return k == Kind::AbsSteerDiff || k == Kind::PathDeviation;
}
inline bool needs_target(Kind k) { return k == Kind::HijackDistance; }

/// Restricts both traces to the scoring window [first, end-of-episode] and
/// equalizes lengths by repeating the final record of the shorter trace
/// (early-terminated episodes keep their last state "frozen"). Returns empty
/// traces when the window starts past both episodes.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> align(const std::vector<T>& a, const std::vector<T>& b,
                                                std::size_t first) {
  if (a.empty() || b.empty()) throw ConfigError("align: traces must be nonempty");
  const std::size_t len = std::max(a.size(), b.size());
  std::pair<std::vector<T>, std::vector<T>> out;
  if (first >= len) return out;
  out.first.reserve(len - first);
  out.second.reserve(len - first);
  for (std::size_t i = first; i < len; ++i) {
    out.first.push_back(a[std::min(i, a.size() - 1)]);
    out.second.push_back(b[std::min(i, b.size() - 1)]);
  }
  return out;
}

enum class Direction { Right, Left };

inline double steering_sum(const std::vector<double>& trace, Direction dir) {
  double s = 0.0;
  for (double v : trace) s += v;
  return dir == Direction::Right ? s : -s;
}

inline double abs_steer_diff(const std::vector<double>& trace,
                             const std::vector<double>& baseline) {
  if (trace.size() != baseline.size()) throw ConfigError("abs_steer_diff: unaligned traces");
  double s = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) s += std::abs(trace[i] - baseline[i]);
  return s;
}

inline double path_deviation(const std::vector<geom::Vec2>& path,
                             const std::vector<geom::Vec2>& baseline) {
  if (path.size() != baseline.size()) throw ConfigError("path_deviation: unaligned paths");
  double s = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) s += (path[i] - baseline[i]).squared_norm();
  return std::sqrt(s);
}

/// Negated L1 distance to the attacker's recorded steering: 0 is a perfect
/// hijack, more negative is further from the target behavior.
inline double hijack_distance(const std::vector<double>& trace,
                              const std::vector<double>& target) {
  if (trace.size() != target.size()) throw ConfigError("hijack_distance: unaligned traces");
  return -abs_steer_diff(trace, target);
}

/// Episode measurements plus companions required by some kinds. Empty
/// companion vectors mean "not provided".
struct Artifacts {
  std::vector<double> steering;
  std::vector<geom::Vec2> path;
  std::vector<double> baseline_steering;
  std::vector<geom::Vec2> baseline_path;
  std::vector<double> target_steering;
  std::size_t window_first = 0;  // F_l from world::visibility_window
};

struct Score {
  double value = 0.0;
  bool visible = true;  // false: pattern never entered view, scored as zero
  std::size_t window_first = 0;
  std::size_t window_length = 0;
};

inline Score evaluate(Kind kind, const Artifacts& art) {
  if (art.steering.empty()) throw ConfigError("evaluate: empty episode trace");
  if (needs_baseline(kind) && art.baseline_steering.empty())
    throw ConfigError("evaluate: " + kind_name(kind) + " requires a baseline");
  if (needs_target(kind) && art.target_steering.empty())
    throw ConfigError("evaluate: hijack_distance requires a target trace");

  Score score;
  score.window_first = art.window_first;
  switch (kind) {
    case Kind::CollideRight:
    case Kind::CollideLeft: {
      if (art.window_first >= art.steering.size()) break;
      std::vector<double> w(art.steering.begin() +
                                static_cast<std::ptrdiff_t>(art.window_first),
                            art.steering.end());
      score.window_length = w.size();
      score.value = steering_sum(
          w, kind == Kind::CollideRight ? Direction::Right : Direction::Left);
      return score;
    }
    case Kind::AbsSteerDiff: {
      auto [a, b] = align(art.steering, art.baseline_steering, art.window_first);
      if (a.empty()) break;
      score.window_length = a.size();
      score.value = abs_steer_diff(a, b);
      return score;
    }
    case Kind::PathDeviation: {
      if (art.path.empty() || art.baseline_path.empty())
        throw ConfigError("evaluate: path_deviation requires both paths");
      auto [a, b] = align(art.path, art.baseline_path, art.window_first);
      if (a.empty()) break;
      score.window_length = a.size();
      score.value = path_deviation(a, b);
      return score;
    }
    case Kind::HijackDistance: {
      auto [a, b] = align(art.steering, art.target_steering, art.window_first);
      if (a.empty()) break;
      score.window_length = a.size();
      score.value = hijack_distance(a, b);
      return score;
    }
  }
  score.visible = false;  // empty scoring window: sentinel zero, flagged
  score.value = 0.0;
  score.window_length = 0;
  return score;
}

}  // namespace advmark::objective
