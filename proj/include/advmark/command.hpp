#pragma once

#include <string>

#include "advmark/errors.hpp"

namespace advmark {

/// High-level directive conditioning the controller: lane-follow everywhere,
/// or a branch choice while inside a junction's command zone.
enum class Command { LaneFollow, LeftAtIntersection, RightAtIntersection, StraightAtIntersection };

inline std::string command_name(Command c) {
  switch (c) {
    case Command::LaneFollow: return "lane_follow";
    case Command::LeftAtIntersection: return "left";
    case Command::RightAtIntersection: return "right";
    case Command::StraightAtIntersection: return "straight";
  }
  return "?";
}

inline Command command_from_name(const std::string& name) {
  if (name == "lane_follow") return Command::LaneFollow;
  if (name == "left") return Command::LeftAtIntersection;
  if (name == "right") return Command::RightAtIntersection;
  if (name == "straight") return Command::StraightAtIntersection;
  throw ConfigError("unknown command: " + name);
}

}  // namespace advmark
