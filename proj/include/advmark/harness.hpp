#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "advmark/bayesopt.hpp"
#include "advmark/controller.hpp"
#include "advmark/errors.hpp"
#include "advmark/io.hpp"
#include "advmark/objective.hpp"
#include "advmark/pattern.hpp"
#include "advmark/simulate.hpp"
#include "advmark/world.hpp"

namespace advmark::harness {

/// Default output root when --out and the environment are both silent.
inline constexpr const char* kOutEnv = "ADVMARK_OUT";

inline std::string default_out_root() {
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return "advmark-out";
}

inline bool is_junction(world::Scenario s) {
  return s == world::Scenario::RightIntersection || s == world::Scenario::LeftIntersection ||
         s == world::Scenario::StraightIntersection;
}

/// The command each scenario drives under when the config does not override.
inline Command default_command(world::Scenario s) {
  switch (s) {
    case world::Scenario::RightIntersection: return Command::RightAtIntersection;
    case world::Scenario::LeftIntersection: return Command::LeftAtIntersection;
    case world::Scenario::StraightIntersection: return Command::StraightAtIntersection;
    default: return Command::LaneFollow;
  }
}

inline std::string default_slot(world::Scenario s) {
  switch (s) {
    case world::Scenario::StraightRoad: return "mid";
    case world::Scenario::RightTurn:
    case world::Scenario::LeftTurn: return "turn-apex";
    default: return "junction";
  }
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
  world::Scenario scenario = world::Scenario::RightTurn;
  world::Approach approach = world::Approach::None;  // None = scenario default
  std::string slot;                                  // empty = scenario default
  pattern::PatternFamily family = pattern::PatternFamily::two_line();
  objective::Kind objective = objective::Kind::AbsSteerDiff;
  std::string strategy = "bayes";  // random | grid | bayes
  std::size_t budget = 100;
  std::size_t warmup = 20;
  std::uint64_t seed = 0;
  int workers = 1;
  controller::ControllerSpec controller;
  simulate::SimConfig sim;
  std::string command;  // command name, empty = scenario default
  std::string target;   // hijack target command name, empty = none
  std::string out_dir;  // empty = default_out_root()
  bayesopt::HyperPolicy hyper;
  std::vector<std::size_t> grid_counts;  // per-dim point counts for grid runs
  bool save_episodes = false;

  void check() const {
    if (strategy != "random" && strategy != "grid" && strategy != "bayes")
      throw ConfigError("strategy must be random, grid, or bayes: " + strategy);
    if (budget < 1) throw ConfigError("budget must be >= 1");
    if (strategy == "bayes" && (warmup < 1 || warmup > budget))
      throw ConfigError("bayes needs 1 <= warmup <= budget");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!command.empty()) command_from_name(command);  // validates
    if (!target.empty()) command_from_name(target);
    if (objective::needs_target(objective)) {
      if (!is_junction(scenario))
        throw ConfigError("hijack objectives need an intersection scenario");
      if (target.empty())
        throw ConfigError("hijack objectives need a target command");
    }
    if (!grid_counts.empty() &&
        grid_counts.size() != static_cast<std::size_t>(family.dimension()))
      throw ConfigError("grid_counts must match the family dimension");
    controller.check();
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"scenario", world::scenario_name(c.scenario)},
       {"approach", world::approach_name(c.approach)},
       {"slot", c.slot},
       {"pattern", c.family},
       {"objective", objective::kind_name(c.objective)},
       {"strategy", c.strategy},
       {"budget", c.budget},
       {"warmup", c.warmup},
       {"seed", c.seed},
       {"workers", c.workers},
       {"controller", c.controller},
       {"sim", c.sim},
       {"command", c.command},
       {"target", c.target},
       {"hyper", c.hyper},
       {"grid_counts", c.grid_counts},
       {"save_episodes", c.save_episodes}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  ExperimentConfig d;
  if (j.contains("scenario"))
    c.scenario = world::scenario_from_name(j.at("scenario").get<std::string>());
  if (j.contains("approach"))
    c.approach = world::approach_from_name(j.at("approach").get<std::string>());
  c.slot = j.value("slot", d.slot);
  if (j.contains("pattern")) j.at("pattern").get_to(c.family);
  if (j.contains("objective"))
    c.objective = objective::kind_from_name(j.at("objective").get<std::string>());
  c.strategy = j.value("strategy", d.strategy);
  c.budget = j.value("budget", d.budget);
  c.warmup = j.value("warmup", d.warmup);
  c.seed = j.value("seed", d.seed);
  c.workers = j.value("workers", d.workers);
  if (j.contains("controller")) j.at("controller").get_to(c.controller);
  if (j.contains("sim")) j.at("sim").get_to(c.sim);
  c.command = j.value("command", d.command);
  c.target = j.value("target", d.target);
  if (j.contains("hyper")) j.at("hyper").get_to(c.hyper);
  c.grid_counts = j.value("grid_counts", d.grid_counts);
  c.save_episodes = j.value("save_episodes", d.save_episodes);
  // out_dir is an environment concern, never part of a config file
}

// ---------------------------------------------------------------------------
// Resolution: layout, commands, frame budget, fitted parameter space

struct ResolvedExperiment {
  ExperimentConfig cfg;  // sim.max_frames raised to the scenario frame budget
  world::RoadLayout layout;
  Command command = Command::LaneFollow;
  Command target = Command::LaneFollow;  // meaningful only for hijack runs
  std::string slot;
  world::CanvasPlacement placement;
  pattern::ParamSpace space;
  std::string out_root;
};

/// Episode frame budget: 1.5x the course length at the scenario's slowest
/// sustained speed (junction runs crawl at junction_speed through the zone).
inline int frame_budget(const world::RoadLayout& layout, const controller::ControllerSpec& cs,
                        const simulate::SimConfig& sim) {
  const double course =
      layout.centerline.length() + (layout.has_pad ? layout.cfg.leg_length : 0.0);
  const double floor_speed = layout.has_pad ? cs.junction_speed : cs.v_target;
  const int need = static_cast<int>(std::ceil(1.5 * course / (floor_speed * sim.dt)));
  return std::max(sim.max_frames, need);
}

inline ResolvedExperiment resolve(ExperimentConfig cfg) {
  cfg.check();
  ResolvedExperiment r;
  if (is_junction(cfg.scenario) && cfg.approach != world::Approach::None)
    r.layout = world::build_junction_layout(cfg.approach);
  else
    r.layout = world::build_layout(cfg.scenario);
  r.layout.scenario = cfg.scenario;

  r.command = cfg.command.empty() ? default_command(cfg.scenario)
                                  : command_from_name(cfg.command);
  if (!cfg.target.empty()) {
    r.target = command_from_name(cfg.target);
    if (r.target == r.command)
      throw ConfigError("hijack target must differ from the driven command");
    world::gate_toward(r.layout, r.target);  // validates against the approach
  }
  if (r.command != Command::LaneFollow)
    world::gate_toward(r.layout, r.command);

  r.slot = cfg.slot.empty() ? default_slot(cfg.scenario) : cfg.slot;
  const auto it = r.layout.slots.find(r.slot);
  if (it == r.layout.slots.end())
    throw ConfigError("layout has no slot named " + r.slot);
  r.placement = it->second;

  r.space = pattern::param_space(cfg.family);
  // Position dims index canvas rows; fit them to this slot's canvas height.
  for (auto& d : r.space.dims)
    if (d.role == pattern::DimRole::Position) d.upper = static_cast<double>(r.placement.height_px);
  if (!cfg.grid_counts.empty())
    for (std::size_t i = 0; i < cfg.grid_counts.size(); ++i)
      r.space.with_grid_count(i, cfg.grid_counts[i]);
  r.space.check();

  cfg.sim.max_frames = frame_budget(r.layout, cfg.controller, cfg.sim);
  r.out_root = cfg.out_dir.empty() ? default_out_root() : cfg.out_dir;
  r.cfg = std::move(cfg);
  return r;
}

// ---------------------------------------------------------------------------
// Baseline and target caches, content-addressed under <out>/cache.

struct BaselineCache {
  simulate::EpisodeTrace trace;
  std::vector<double> steering;
  std::vector<geom::Vec2> path;
  std::string file;
  bool from_cache = false;
};

struct TargetCache {
  simulate::EpisodeTrace trace;
  std::vector<double> steering;
  geom::Vec2 endpoint{0.0, 0.0};
  std::size_t gate = 0;
  std::string file;
  bool from_cache = false;
};

namespace detail {

inline nlohmann::json episode_identity(const ResolvedExperiment& r, Command command,
                                       const char* role) {
  return {{"role", role},
          {"scenario", world::scenario_name(r.cfg.scenario)},
          {"approach", world::approach_name(r.layout.approach)},
          {"command", command_name(command)},
          {"controller", r.cfg.controller},
          {"sim", r.cfg.sim}};
}

inline std::string cache_path(const ResolvedExperiment& r, const nlohmann::json& identity) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(r.out_root) / "cache";
  fs::create_directories(dir);
  const std::string role = identity.at("role").get<std::string>();
  return (dir / (role + "-" + io::content_key(identity) + ".jsonl")).string();
}

inline simulate::EpisodeTrace attack_free_episode(const ResolvedExperiment& r, Command command) {
  return simulate::run_episode(world::World::attack_free(r.layout), r.cfg.controller, command,
                               r.cfg.sim);
}

}  // namespace detail

/// Attack-free reference run under the experiment's own command. A cached
/// episode with the same identity is reused without simulating. The premise
/// of every search is a clean baseline, so anything but Safe is an error.
inline BaselineCache run_baseline(const ResolvedExperiment& r) {
  BaselineCache out;
  const nlohmann::json identity = detail::episode_identity(r, r.command, "baseline");
  out.file = detail::cache_path(r, identity);
  if (std::filesystem::exists(out.file)) {
    out.trace = io::read_episode(out.file);
    out.from_cache = true;
  } else {
    out.trace = detail::attack_free_episode(r, r.command);
    const auto rep = simulate::infractions(out.trace, r.cfg.sim.vehicle, r.cfg.controller.v_target);
    if (rep.severity != simulate::Severity::Safe)
      throw ConfigError("baseline run is not Safe (severity " +
                        simulate::severity_name(rep.severity) + "); fix the configuration");
    if (!out.trace.reached_goal)
      throw ConfigError("baseline run did not reach the goal gate (" + out.trace.end_reason +
                        "); fix the configuration");
    io::write_episode(out.file, out.trace);
  }
  out.steering = out.trace.steering();
  out.path = out.trace.path();
  return out;
}

/// Attack-free run under the attacker's command: records the steering the
/// hijack search will steer toward and the gate that certifies success.
inline TargetCache record_target(const ResolvedExperiment& r) {
  if (r.cfg.target.empty()) throw ConfigError("record_target: no target command configured");
  TargetCache out;
  out.gate = world::gate_toward(r.layout, r.target);
  const nlohmann::json identity = detail::episode_identity(r, r.target, "target");
  out.file = detail::cache_path(r, identity);
  if (std::filesystem::exists(out.file)) {
    out.trace = io::read_episode(out.file);
    out.from_cache = true;
  } else {
    out.trace = detail::attack_free_episode(r, r.target);
    const auto rep = simulate::infractions(out.trace, r.cfg.sim.vehicle, r.cfg.controller.v_target);
    if (rep.severity != simulate::Severity::Safe)
      throw ConfigError("target run is not Safe (severity " +
                        simulate::severity_name(rep.severity) + "); fix the configuration");
    if (out.trace.crossed_gate != static_cast<int>(out.gate))
      throw ConfigError("target run exited by the wrong gate; fix the configuration");
    io::write_episode(out.file, out.trace);
  }
  out.steering = out.trace.steering();
  if (out.trace.frames.empty()) throw RuntimeFailure("target episode has no frames");
  out.endpoint = out.trace.frames.back().state.pos();
  return out;
}

// ---------------------------------------------------------------------------
// Hijack classification

/// success <=> the episode leaves by the attacker's gate AND stays Safe.
struct HijackOutcome {
  bool success = false;
  bool reached_target_gate = false;
  simulate::Severity severity = simulate::Severity::Safe;
  double distance = 0.0;  // meters, final pose to the target run's endpoint
};

inline void to_json(nlohmann::json& j, const HijackOutcome& o) {
  j = {{"success", o.success},
       {"reached_target_gate", o.reached_target_gate},
       {"severity", simulate::severity_name(o.severity)},
       {"distance", o.distance}};
}

inline void from_json(const nlohmann::json& j, HijackOutcome& o) {
  o.success = j.at("success").get<bool>();
  o.reached_target_gate = j.at("reached_target_gate").get<bool>();
  o.severity = simulate::severity_from_name(j.at("severity").get<std::string>());
  o.distance = j.at("distance").get<double>();
}

inline HijackOutcome classify_hijack(const simulate::EpisodeTrace& episode,
                                     const TargetCache& target,
                                     const simulate::VehicleSpec& vehicle = {},
                                     double v_target = 8.0) {
  if (episode.frames.empty()) throw ConfigError("classify_hijack: empty episode");
  HijackOutcome o;
  o.reached_target_gate = episode.crossed_gate == static_cast<int>(target.gate);
  o.severity = simulate::infractions(episode, vehicle, v_target).severity;
  o.distance = (episode.frames.back().state.pos() - target.endpoint).norm();
  o.success = o.reached_target_gate && o.severity == simulate::Severity::Safe;
  return o;
}

// ---------------------------------------------------------------------------
// Search runs

struct SearchOutput {
  bayesopt::SearchResult result;
  std::string run_dir;
  std::string records_file;
  std::string summary_file;
  nlohmann::json summary;
};

namespace detail {

/// Distinct parameter vectors after normalizing to the unit box and rounding
/// to 1e-6; the unit of "one successful attack" in cumulative counts.
inline std::string unique_key(const std::vector<double>& params,
                              const pattern::ParamSpace& space) {
  std::string key;
  for (std::size_t i = 0; i < params.size() && i < space.dims.size(); ++i) {
    const auto& d = space.dims[i];
    const double t = (params[i] - d.lower) / (d.upper - d.lower);
    key += std::to_string(std::llround(t * 1e6));
    key += ':';
  }
  return key;
}

inline bool severity_at_least(simulate::Severity s, simulate::Severity floor) {
  return static_cast<int>(s) >= static_cast<int>(floor);
}

}  // namespace detail

/// One full search: places each candidate pattern, runs the closed-loop
/// episode, scores the configured objective, and appends one record per
/// iteration to <run_dir>/records.jsonl. Reinvoking with the same config
/// resumes after the last completed iteration.
inline SearchOutput run_search(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  ResolvedExperiment r = resolve(config);

  std::optional<BaselineCache> baseline;
  if (objective::needs_baseline(r.cfg.objective)) baseline.emplace(run_baseline(r));
  std::optional<TargetCache> target;
  if (objective::needs_target(r.cfg.objective)) target.emplace(record_target(r));

  nlohmann::json cfg_echo = r.cfg;
  SearchOutput out;
  out.run_dir = (fs::path(r.out_root) / "runs" / io::content_key(cfg_echo)).string();
  fs::create_directories(out.run_dir);
  out.records_file = (fs::path(out.run_dir) / "records.jsonl").string();
  out.summary_file = (fs::path(out.run_dir) / "summary.json").string();

  nlohmann::json header = {{"config", cfg_echo},
                           {"space", r.space},
                           {"slot", r.placement},
                           {"baseline_episode", baseline ? baseline->file : ""},
                           {"target_episode", target ? target->file : ""}};

  bayesopt::SearchOptions options;
  options.workers = r.cfg.workers;
  options.hyper = r.cfg.hyper;
  if (fs::exists(out.records_file)) {
    const io::JsonlFile prior = io::read_jsonl(out.records_file, "search");
    options.resume.reserve(prior.records.size());
    for (const nlohmann::json& rec : prior.records)
      options.resume.push_back(rec.get<bayesopt::IterationRecord>());
  }
  io::JsonlWriter writer(out.records_file, "search", header);
  options.on_record = [&writer](const bayesopt::IterationRecord& rec) {
    writer.append(nlohmann::json(rec));
  };

  const std::string episodes_dir = (fs::path(out.run_dir) / "episodes").string();
  if (r.cfg.save_episodes) fs::create_directories(episodes_dir);

  const auto evaluator = [&](const pattern::PatternParams& params,
                             std::size_t index) -> bayesopt::EvalOutcome {
    bayesopt::EvalOutcome res;
    world::World w;
    try {
      const pattern::Canvas canvas =
          pattern::rasterize(params, r.placement.width_px, r.placement.height_px);
      w = world::place_slot(r.layout, r.slot, canvas);
    } catch (const PlacementError& e) {
      res.ok = false;
      res.error = e.what();
      res.annotations["error_kind"] = "placement";
      return res;
    }
    const simulate::EpisodeTrace trace =
        simulate::run_episode(w, r.cfg.controller, r.command, r.cfg.sim);
    const simulate::InfractionReport rep =
        simulate::infractions(trace, r.cfg.sim.vehicle, r.cfg.controller.v_target);

    objective::Artifacts art;
    art.steering = trace.steering();
    art.path = trace.path();
    if (baseline) {
      art.baseline_steering = baseline->steering;
      art.baseline_path = baseline->path;
    }
    if (target) art.target_steering = target->steering;
    art.window_first = world::visibility_window(w, trace.poses(), r.cfg.sim.obs).first;
    const objective::Score score = objective::evaluate(r.cfg.objective, art);

    res.score = score.value;
    res.annotations["severity"] = simulate::severity_name(rep.severity);
    res.annotations["infractions"] = rep;
    res.annotations["visible"] = score.visible;
    res.annotations["window_first"] = score.window_first;
    res.annotations["end_reason"] = trace.end_reason;
    res.annotations["crossed_gate"] = trace.crossed_gate;
    if (target)
      res.annotations["hijack"] =
          classify_hijack(trace, *target, r.cfg.sim.vehicle, r.cfg.controller.v_target);
    if (r.cfg.save_episodes) {
      const std::string ep =
          (fs::path(episodes_dir) / ("ep-" + std::to_string(index) + ".jsonl")).string();
      io::write_episode(ep, trace);
      res.annotations["episode"] = ep;
    }
    return res;
  };

  if (r.cfg.strategy == "bayes")
    out.result = bayesopt::bayes_search(r.cfg.family, r.space, r.cfg.warmup, r.cfg.budget,
                                        evaluator, r.cfg.seed, options);
  else if (r.cfg.strategy == "random")
    out.result = bayesopt::random_search(r.cfg.family, r.space, r.cfg.budget, evaluator,
                                         r.cfg.seed, options);
  else
    out.result = bayesopt::grid_search(r.cfg.family, r.space, evaluator, options);

  // Summary: aggregate severities, count distinct successful patterns, and
  // re-simulate the best candidate so reports can overlay its path.
  std::map<std::string, int> severity_counts;
  std::set<std::string> unique_successes;
  int hijack_successes = 0;
  int first_hijack = -1;
  for (const auto& rec : out.result.records) {
    if (!rec.ok) {
      ++severity_counts["error"];
      continue;
    }
    const std::string sev = rec.annotations.value("severity", "?");
    ++severity_counts[sev];
    if (detail::severity_at_least(simulate::severity_from_name(sev),
                                  simulate::Severity::OppositeLane))
      unique_successes.insert(detail::unique_key(rec.params, r.space));
    if (rec.annotations.contains("hijack") &&
        rec.annotations["hijack"].value("success", false)) {
      ++hijack_successes;
      if (first_hijack < 0) first_hijack = static_cast<int>(rec.index);
    }
  }

  out.summary = {{"config", cfg_echo},
                 {"records", out.result.records.size()},
                 {"found", out.result.found},
                 {"best_index", out.result.best_index},
                 {"best_score", out.result.found ? nlohmann::json(out.result.best_score)
                                                 : nlohmann::json()},
                 {"best_params", out.result.found ? nlohmann::json(out.result.best)
                                                  : nlohmann::json()},
                 {"severity_counts", severity_counts},
                 {"unique_successful_attacks", unique_successes.size()}};
  if (target) {
    out.summary["hijack_successes"] = hijack_successes;
    out.summary["first_hijack_iteration"] = first_hijack;
  }
  if (out.result.found) {
    const pattern::Canvas canvas = pattern::rasterize(
        out.result.best, r.placement.width_px, r.placement.height_px);
    const world::World w = world::place_slot(r.layout, r.slot, canvas);
    const simulate::EpisodeTrace best_trace =
        simulate::run_episode(w, r.cfg.controller, r.command, r.cfg.sim);
    const std::string best_ep = (fs::path(out.run_dir) / "best_episode.jsonl").string();
    if (!fs::exists(best_ep)) io::write_episode(best_ep, best_trace);
    out.summary["best_episode"] = best_ep;
    io::write_png((fs::path(out.run_dir) / "best_pattern.png").string(), canvas);
  }
  io::write_json(out.summary_file, out.summary);
  return out;
}

/// The six-pair hijack protocol entry point: records the target, runs the
/// search under the original command, and reduces the records to outcomes.
inline SearchOutput run_hijack(ExperimentConfig config) {
  config.objective = objective::Kind::HijackDistance;
  return run_search(config);
}

// ---------------------------------------------------------------------------
// Reporting: CSV tables and SVG plots from persisted record files.

namespace detail {

struct LoadedRun {
  nlohmann::json header;
  std::vector<nlohmann::json> records;
  std::string path;
};

struct SeriesPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Minimal line chart: fixed margins, auto-scaled axes, one polyline per
/// series, legend along the top.
inline void svg_line_chart(const std::string& path, const std::string& title,
                           const std::vector<std::pair<std::string, std::vector<SeriesPoint>>>&
                               series) {
  const double W = 640, H = 420, ml = 56, mr = 16, mt = 40, mb = 40;
  double xmax = 1.0, ymax = 1.0;
  for (const auto& [name, pts] : series)
    for (const auto& p : pts) {
      xmax = std::max(xmax, p.x);
      ymax = std::max(ymax, p.y);
    }
  const auto X = [&](double x) { return ml + (W - ml - mr) * (x / xmax); };
  const auto Y = [&](double y) { return H - mb - (H - mt - mb) * (y / ymax); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open for writing: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' viewBox='0 0 " << W << " " << H << "'>\n";
  out << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  out << "<text x='" << ml << "' y='24' font-family='sans-serif' font-size='14'>" << title
      << "</text>\n";
  out << "<line x1='" << ml << "' y1='" << (H - mb) << "' x2='" << (W - mr) << "' y2='"
      << (H - mb) << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << (H - mb)
      << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = xmax * t / 4.0, fy = ymax * t / 4.0;
    out << "<text x='" << X(fx) << "' y='" << (H - mb + 16)
        << "' font-family='sans-serif' font-size='10' text-anchor='middle'>" << fx
        << "</text>\n";
    out << "<text x='" << (ml - 6) << "' y='" << (Y(fy) + 3)
        << "' font-family='sans-serif' font-size='10' text-anchor='end'>" << fy << "</text>\n";
  }
  std::size_t ci = 0;
  for (const auto& [name, pts] : series) {
    const char* color = palette[ci % 5];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (const auto& p : pts) out << X(p.x) << "," << Y(p.y) << " ";
    out << "'/>\n";
    out << "<text x='" << (ml + 110 * static_cast<double>(ci)) << "' y='" << (mt - 6)
        << "' font-family='sans-serif' font-size='11' fill='" << color << "'>" << name
        << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

/// Top-down overlay of the road skeleton, gates, and one or more vehicle
/// paths, auto-fitted to the drawn geometry.
inline void svg_path_overlay(const std::string& path, const world::RoadLayout& layout,
                             const std::vector<std::pair<std::string, std::vector<geom::Vec2>>>&
                                 paths) {
  double x0 = 1e18, x1 = -1e18, y0 = 1e18, y1 = -1e18;
  const auto grow = [&](geom::Vec2 p) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  };
  for (const auto& c : layout.corridors) {
    grow(c.point_at(0.0));
    grow(c.point_at(c.length()));
  }
  for (const auto& [name, pts] : paths)
    for (const auto& p : pts) grow(p);
  for (const auto& g : layout.gates) {
    grow(g.a);
    grow(g.b);
  }
  const double pad = 6.0;
  x0 -= pad; y0 -= pad; x1 += pad; y1 += pad;
  const double W = 640;
  const double H = std::max(120.0, W * (y1 - y0) / (x1 - x0));
  const auto X = [&](double x) { return W * (x - x0) / (x1 - x0); };
  const auto Y = [&](double y) { return H * (y1 - y) / (y1 - y0); };  // north up
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open for writing: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' viewBox='0 0 " << W << " " << H << "'>\n";
  out << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  // one light band per corridor: centerline plus lane edges
  for (const auto& c : layout.corridors) {
    for (double off : {-layout.cfg.lane_width, 0.0, layout.cfg.lane_width}) {
      out << "<polyline fill='none' stroke='" << (off == 0.0 ? "#bbbbbb" : "#dddddd")
          << "' stroke-width='1' points='";
      const int n = 64;
      for (int i = 0; i <= n; ++i) {
        const double s = c.length() * i / n;
        const geom::Pose p = c.pose_at(s);
        const geom::Vec2 q = p.pos + p.left() * off;
        out << X(q.x) << "," << Y(q.y) << " ";
      }
      out << "'/>\n";
    }
  }
  for (const auto& g : layout.gates) {
    out << "<line x1='" << X(g.a.x) << "' y1='" << Y(g.a.y) << "' x2='" << X(g.b.x) << "' y2='"
        << Y(g.b.y) << "' stroke='#808080' stroke-dasharray='4 3'/>\n";
    out << "<text x='" << X((g.a.x + g.b.x) / 2.0) << "' y='" << (Y((g.a.y + g.b.y) / 2.0) - 4)
        << "' font-family='sans-serif' font-size='10' fill='#808080'>" << g.name << "</text>\n";
  }
  std::size_t ci = 0;
  for (const auto& [name, pts] : paths) {
    const char* color = palette[ci % 4];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.8' points='";
    for (const auto& p : pts) out << X(p.x) << "," << Y(p.y) << " ";
    out << "'/>\n";
    out << "<text x='8' y='" << (16 + 14 * static_cast<double>(ci))
        << "' font-family='sans-serif' font-size='11' fill='" << color << "'>" << name
        << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

}  // namespace detail

struct ReportOutput {
  std::vector<std::string> skipped;  // malformed inputs, with reasons
  std::vector<std::string> written;
};

/// Renders the summary artifacts from persisted record files: severity
/// histogram CSV, cumulative unique-success curves (CSV + SVG), the
/// objective comparison table, and baseline-vs-attack overlays where the
/// referenced episodes exist. Malformed files are skipped, not fatal.
inline ReportOutput emit_report(const std::vector<std::string>& record_files,
                                const std::string& report_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(report_dir);
  ReportOutput out;

  std::vector<detail::LoadedRun> runs;
  for (const std::string& f : record_files) {
    try {
      io::JsonlFile file = io::read_jsonl(f, "search");
      if (!file.header.contains("config")) throw ConfigError(f + ": header lacks config");
      runs.push_back({std::move(file.header), std::move(file.records), f});
    } catch (const std::exception& e) {
      out.skipped.push_back(std::string(e.what()));
    }
  }

  // (a) severity histogram per scenario and pattern family
  {
    std::map<std::string, std::map<std::string, int>> hist;  // key -> severity -> n
    for (const auto& run : runs) {
      const auto& cfg = run.header["config"];
      const nlohmann::json fam = cfg.value("pattern", nlohmann::json::object());
      const std::string key = cfg.value("scenario", "?") + "," + fam.value("family", "?");
      for (const auto& rec : run.records) {
        if (!rec.value("ok", false)) continue;
        ++hist[key][rec["annotations"].value("severity", "?")];
      }
    }
    const std::string path = (fs::path(report_dir) / "severity_hist.csv").string();
    std::ofstream csv(path, std::ios::trunc);
    csv << "scenario,family,safe,opposite_lane,offroad,collision\n";
    for (const auto& [key, counts] : hist) {
      csv << key;
      for (const char* sev : {"safe", "opposite_lane", "offroad", "collision"}) {
        const auto it = counts.find(sev);
        csv << ',' << (it == counts.end() ? 0 : it->second);
      }
      csv << '\n';
    }
    out.written.push_back(path);
  }

  // (b) cumulative unique successful attacks vs iteration, per strategy
  {
    std::map<std::string, std::vector<detail::SeriesPoint>> curves;
    for (const auto& run : runs) {
      const auto& cfg = run.header["config"];
      const std::string strategy = cfg.value("strategy", "?");
      pattern::ParamSpace space = run.header.value("space", nlohmann::json::object())
                                      .get<pattern::ParamSpace>();
      std::set<std::string> seen;
      auto& curve = curves[strategy];
      std::size_t it_idx = 0;
      for (const auto& rec : run.records) {
        if (rec.value("ok", false)) {
          const std::string sev = rec["annotations"].value("severity", "safe");
          if (detail::severity_at_least(simulate::severity_from_name(sev),
                                        simulate::Severity::OppositeLane))
            seen.insert(detail::unique_key(rec["params"].get<std::vector<double>>(), space));
        }
        curve.push_back({static_cast<double>(it_idx + 1), static_cast<double>(seen.size())});
        ++it_idx;
      }
    }
    const std::string cpath = (fs::path(report_dir) / "cumulative_success.csv").string();
    std::ofstream csv(cpath, std::ios::trunc);
    csv << "strategy,iteration,unique_successful_attacks\n";
    std::vector<std::pair<std::string, std::vector<detail::SeriesPoint>>> series;
    for (auto& [strategy, curve] : curves) {
      for (const auto& p : curve)
        csv << strategy << ',' << static_cast<long long>(p.x) << ','
            << static_cast<long long>(p.y) << '\n';
      series.emplace_back(strategy, curve);
    }
    out.written.push_back(cpath);
    const std::string spath = (fs::path(report_dir) / "cumulative_success.svg").string();
    detail::svg_line_chart(spath, "unique successful attacks vs iteration", series);
    out.written.push_back(spath);
  }

  // (c) objective comparison: severity percentages per objective, rows
  // summing to 100
  {
    std::map<std::string, std::map<std::string, int>> table;  // objective -> severity -> n
    for (const auto& run : runs) {
      const std::string obj = run.header["config"].value("objective", "?");
      for (const auto& rec : run.records) {
        if (!rec.value("ok", false)) continue;
        ++table[obj][rec["annotations"].value("severity", "?")];
      }
    }
    const std::string path = (fs::path(report_dir) / "objective_table.csv").string();
    std::ofstream csv(path, std::ios::trunc);
    csv << "objective,episodes,safe_pct,opposite_lane_pct,offroad_pct,collision_pct\n";
    for (const auto& [obj, counts] : table) {
      double total = 0;
      for (const auto& [sev, n] : counts) total += n;
      csv << obj << ',' << static_cast<long long>(total);
      double acc = 0.0;
      const char* sevs[] = {"safe", "opposite_lane", "offroad", "collision"};
      for (std::size_t i = 0; i < 4; ++i) {
        const auto it = counts.find(sevs[i]);
        const double n = it == counts.end() ? 0.0 : it->second;
        // last column absorbs rounding so each row sums to exactly 100
        double pct = total > 0 ? 100.0 * n / total : (i == 0 ? 100.0 : 0.0);
        pct = std::round(pct * 100.0) / 100.0;
        if (i == 3) pct = std::round((100.0 - acc) * 100.0) / 100.0;
        acc += pct;
        csv << ',' << pct;
      }
      csv << '\n';
    }
    out.written.push_back(path);
  }

  // (d) baseline vs attack overlays, where the episodes are on disk
  std::size_t overlay_idx = 0;
  for (const auto& run : runs) {
    const std::string base_ep = run.header.value("baseline_episode", "");
    std::string attack_ep;
    {
      const fs::path run_dir = fs::path(run.path).parent_path();
      const fs::path cand = run_dir / "best_episode.jsonl";
      if (fs::exists(cand)) attack_ep = cand.string();
    }
    if (base_ep.empty() || attack_ep.empty() || !fs::exists(base_ep)) continue;
    try {
      const simulate::EpisodeTrace base = io::read_episode(base_ep);
      const simulate::EpisodeTrace attack = io::read_episode(attack_ep);
      const auto& cfg = run.header["config"];
      const world::Scenario scenario =
          world::scenario_from_name(cfg.value("scenario", "straight_road"));
      const world::Approach approach =
          world::approach_from_name(cfg.value("approach", "none"));
      const world::RoadLayout layout =
          (is_junction(scenario) && approach != world::Approach::None)
              ? world::build_junction_layout(approach)
              : world::build_layout(scenario);
      const std::string path =
          (fs::path(report_dir) / ("overlay-" + std::to_string(overlay_idx++) + ".svg"))
              .string();
      detail::svg_path_overlay(path, layout,
                               {{"baseline", base.path()}, {"attack", attack.path()}});
      out.written.push_back(path);
    } catch (const std::exception& e) {
      out.skipped.push_back(std::string(e.what()));
    }
  }

  nlohmann::json diag = {{"written", out.written}, {"skipped", out.skipped}};
  io::write_json((fs::path(report_dir) / "report.json").string(), diag);
  return out;
}

}  // namespace advmark::harness
