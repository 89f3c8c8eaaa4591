#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "json.hpp"

#include "advmark/bayesopt.hpp"
#include "advmark/controller.hpp"
#include "advmark/errors.hpp"
#include "advmark/pattern.hpp"
#include "advmark/simulate.hpp"
#include "advmark/world.hpp"

// JSON conversions live next to their types so nlohmann finds them by ADL;
// this header is the single place where on-disk formats are defined.

namespace advmark::pattern {

inline void to_json(nlohmann::json& j, const PatternFamily& f) {
  j = {{"family", f.name()}};
  if (f.kind == FamilyKind::NLines) j["n"] = f.n;
}

inline void from_json(const nlohmann::json& j, PatternFamily& f) {
  const std::string name = j.at("family").get<std::string>();
  if (name == "single_line") f = PatternFamily::single_line();
  else if (name == "double_line") f = PatternFamily::double_line();
  else if (name == "two_line") f = PatternFamily::two_line();
  else if (name == "n_lines") f = PatternFamily::n_lines(j.at("n").get<int>());
  else throw ConfigError("unknown pattern family: " + name);
}

inline void to_json(nlohmann::json& j, const PatternParams& p) {
  to_json(j, p.family);
  j["values"] = p.values;
}

inline void from_json(const nlohmann::json& j, PatternParams& p) {
  from_json(j, p.family);
  p.values = j.at("values").get<std::vector<double>>();
}

inline void to_json(nlohmann::json& j, const DimBounds& d) {
  j = {{"role", role_name(d.role)},
       {"lower", d.lower},
       {"upper", d.upper},
       {"grid_step", d.grid_step}};
}

inline void from_json(const nlohmann::json& j, DimBounds& d) {
  d.role = role_from_name(j.at("role").get<std::string>());
  d.lower = j.at("lower").get<double>();
  d.upper = j.at("upper").get<double>();
  d.grid_step = j.at("grid_step").get<double>();
}

inline void to_json(nlohmann::json& j, const ParamSpace& s) { j = {{"dims", s.dims}}; }

inline void from_json(const nlohmann::json& j, ParamSpace& s) {
  s.dims = j.at("dims").get<std::vector<DimBounds>>();
}

}  // namespace advmark::pattern

namespace advmark::world {

inline void to_json(nlohmann::json& j, const CanvasPlacement& p) {
  j = {{"arc_position", p.arc_position}, {"lateral_offset", p.lateral_offset},
       {"yaw", p.yaw},                   {"scale", p.scale},
       {"width_px", p.width_px},         {"height_px", p.height_px}};
}

inline void from_json(const nlohmann::json& j, CanvasPlacement& p) {
  p.arc_position = j.at("arc_position").get<double>();
  p.lateral_offset = j.at("lateral_offset").get<double>();
  p.yaw = j.at("yaw").get<double>();
  p.scale = j.at("scale").get<double>();
  p.width_px = j.value("width_px", 200);
  p.height_px = j.value("height_px", 200);
}

inline void to_json(nlohmann::json& j, const ObsConfig& c) {
  j = {{"rows", c.rows}, {"cols", c.cols}, {"lookahead", c.lookahead}, {"width", c.width}};
}

inline void from_json(const nlohmann::json& j, ObsConfig& c) {
  c.rows = j.at("rows").get<int>();
  c.cols = j.at("cols").get<int>();
  c.lookahead = j.at("lookahead").get<double>();
  c.width = j.at("width").get<double>();
}

}  // namespace advmark::world

namespace advmark::controller {

inline void to_json(nlohmann::json& j, const ControllerSpec& s) {
  j = {{"dark_threshold", s.dark_threshold},
       {"bright_threshold", s.bright_threshold},
       {"k_p", s.k_p},
       {"k_d", s.k_d},
       {"v_target", s.v_target},
       {"w_cmd", s.w_cmd},
       {"branch_bias", s.branch_bias},
       {"junction_speed", s.junction_speed},
       {"speed_gain", s.speed_gain},
       {"curve_slow", s.curve_slow}};
}

inline void from_json(const nlohmann::json& j, ControllerSpec& s) {
  ControllerSpec d;
  s.dark_threshold = j.value("dark_threshold", d.dark_threshold);
  s.bright_threshold = j.value("bright_threshold", d.bright_threshold);
  s.k_p = j.value("k_p", d.k_p);
  s.k_d = j.value("k_d", d.k_d);
  s.v_target = j.value("v_target", d.v_target);
  s.w_cmd = j.value("w_cmd", d.w_cmd);
  s.branch_bias = j.value("branch_bias", d.branch_bias);
  s.junction_speed = j.value("junction_speed", d.junction_speed);
  s.speed_gain = j.value("speed_gain", d.speed_gain);
  s.curve_slow = j.value("curve_slow", d.curve_slow);
  s.check();
}

inline void to_json(nlohmann::json& j, const Control& c) {
  j = {{"steer", c.steer}, {"throttle", c.throttle}, {"brake", c.brake}, {"valid", c.valid}};
}

inline void from_json(const nlohmann::json& j, Control& c) {
  c.steer = j.at("steer").get<double>();
  c.throttle = j.at("throttle").get<double>();
  c.brake = j.at("brake").get<double>();
  c.valid = j.value("valid", true);
}

}  // namespace advmark::controller

namespace advmark::simulate {

inline void to_json(nlohmann::json& j, const VehicleSpec& v) {
  j = {{"wheelbase", v.wheelbase}, {"max_steer_deg", v.max_steer_deg},
       {"max_accel", v.max_accel}, {"max_brake", v.max_brake},
       {"drag", v.drag},           {"mass", v.mass},
       {"length", v.length},       {"width", v.width}};
}

inline void from_json(const nlohmann::json& j, VehicleSpec& v) {
  VehicleSpec d;
  v.wheelbase = j.value("wheelbase", d.wheelbase);
  v.max_steer_deg = j.value("max_steer_deg", d.max_steer_deg);
  v.max_accel = j.value("max_accel", d.max_accel);
  v.max_brake = j.value("max_brake", d.max_brake);
  v.drag = j.value("drag", d.drag);
  v.mass = j.value("mass", d.mass);
  v.length = j.value("length", d.length);
  v.width = j.value("width", d.width);
}

inline void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"dt", c.dt},
       {"max_frames", c.max_frames},
       {"start_speed", c.start_speed},
       {"vehicle", c.vehicle},
       {"obs", c.obs}};
}

inline void from_json(const nlohmann::json& j, SimConfig& c) {
  SimConfig d;
  c.dt = j.value("dt", d.dt);
  c.max_frames = j.value("max_frames", d.max_frames);
  c.start_speed = j.value("start_speed", d.start_speed);
  if (j.contains("vehicle")) j.at("vehicle").get_to(c.vehicle);
  if (j.contains("obs")) j.at("obs").get_to(c.obs);
}

inline void to_json(nlohmann::json& j, const VehicleState& s) {
  j = {{"x", s.x}, {"y", s.y}, {"heading", s.heading}, {"speed", s.speed}};
}

inline void from_json(const nlohmann::json& j, VehicleState& s) {
  s.x = j.at("x").get<double>();
  s.y = j.at("y").get<double>();
  s.heading = j.at("heading").get<double>();
  s.speed = j.at("speed").get<double>();
}

inline void to_json(nlohmann::json& j, const RegionFractions& r) {
  j = {{"own_lane", r.own_lane},
       {"opposite_lane", r.opposite_lane},
       {"offroad", r.offroad}};
}

inline void from_json(const nlohmann::json& j, RegionFractions& r) {
  r.own_lane = j.at("own_lane").get<double>();
  r.opposite_lane = j.at("opposite_lane").get<double>();
  r.offroad = j.at("offroad").get<double>();
}

inline void to_json(nlohmann::json& j, const Frame& f) {
  j = {{"index", f.index},
       {"state", f.state},
       {"control", f.control},
       {"regions", f.regions},
       {"collision", f.collision}};
}

inline void from_json(const nlohmann::json& j, Frame& f) {
  f.index = j.at("index").get<int>();
  j.at("state").get_to(f.state);
  j.at("control").get_to(f.control);
  j.at("regions").get_to(f.regions);
  f.collision = j.at("collision").get<double>();
}

inline void to_json(nlohmann::json& j, const InfractionReport& r) {
  j = {{"mean_opposite", r.mean_opposite},
       {"mean_offroad", r.mean_offroad},
       {"collision_intensity", r.collision_intensity},
       {"normalized_collision", r.normalized_collision},
       {"severity", severity_name(r.severity)}};
}

inline void from_json(const nlohmann::json& j, InfractionReport& r) {
  r.mean_opposite = j.at("mean_opposite").get<double>();
  r.mean_offroad = j.at("mean_offroad").get<double>();
  r.collision_intensity = j.at("collision_intensity").get<double>();
  r.normalized_collision = j.at("normalized_collision").get<double>();
  r.severity = severity_from_name(j.at("severity").get<std::string>());
}

}  // namespace advmark::simulate

namespace advmark::bayesopt {

inline void to_json(nlohmann::json& j, const IterationRecord& r) {
  j = {{"iteration", r.index}, {"phase", r.phase},       {"params", r.params},
       {"ok", r.ok},           {"score", r.score},       {"error", r.error},
       {"fallback", r.fallback}, {"annotations", r.annotations},
       {"wall_seconds", r.wall_seconds}};
}

inline void from_json(const nlohmann::json& j, IterationRecord& r) {
  r.index = j.at("iteration").get<std::size_t>();
  r.phase = j.at("phase").get<std::string>();
  r.params = j.at("params").get<std::vector<double>>();
  r.ok = j.at("ok").get<bool>();
  r.score = j.at("score").get<double>();
  r.error = j.value("error", std::string());
  r.fallback = j.value("fallback", false);
  r.annotations = j.value("annotations", nlohmann::json::object());
  r.wall_seconds = j.value("wall_seconds", 0.0);
}

inline void to_json(nlohmann::json& j, const HyperPolicy& h) {
  j = {{"ell_min", h.ell_min},     {"ell_max", h.ell_max},
       {"ell_grid", h.ell_grid},   {"sigma_f2", h.sigma_f2},
       {"sigma_n2", h.sigma_n2},   {"max_jitter", h.max_jitter}};
}

inline void from_json(const nlohmann::json& j, HyperPolicy& h) {
  HyperPolicy d;
  h.ell_min = j.value("ell_min", d.ell_min);
  h.ell_max = j.value("ell_max", d.ell_max);
  h.ell_grid = j.value("ell_grid", d.ell_grid);
  h.sigma_f2 = j.value("sigma_f2", d.sigma_f2);
  h.sigma_n2 = j.value("sigma_n2", d.sigma_n2);
  h.max_jitter = j.value("max_jitter", d.max_jitter);
}

}  // namespace advmark::bayesopt

namespace advmark::io {

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Content hashing (FNV-1a 64), used for content-addressed cache paths.

inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Stable key for a JSON value: nlohmann objects iterate in sorted key
/// order, so dump() is canonical for our payloads.
inline std::string content_key(const nlohmann::json& j) { return hash_hex(fnv1a(j.dump())); }

// ---------------------------------------------------------------------------
// JSON files

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

// ---------------------------------------------------------------------------
// JSON-lines with a schema version header. Line 1 is a header object
// {"schema": N, "kind": ..., ...meta}; every following line is one record.

struct JsonlFile {
  nlohmann::json header;
  std::vector<nlohmann::json> records;
};

/// Append-mode writer. A new or empty file gets the header line first;
/// reopening an existing file (resume) verifies the header matches.
class JsonlWriter {
 public:
  JsonlWriter(const std::string& path, const std::string& kind,
              nlohmann::json meta = nlohmann::json::object())
      : path_(path) {
    nlohmann::json header = std::move(meta);
    header["schema"] = kSchemaVersion;
    header["kind"] = kind;
    bool fresh = true;
    {
      std::ifstream probe(path);
      std::string first;
      if (probe && std::getline(probe, first) && !first.empty()) {
        fresh = false;
        nlohmann::json existing;
        try {
          existing = nlohmann::json::parse(first);
        } catch (const nlohmann::json::exception&) {
          throw ConfigError("existing file has no valid header: " + path);
        }
        if (existing != header)
          throw ConfigError("header mismatch, refusing to append: " + path);
      }
    }
    out_.open(path, std::ios::app);
    if (!out_) throw RuntimeFailure("cannot open for append: " + path);
    if (fresh) {
      out_ << header.dump() << '\n';
      out_.flush();
    }
  }

  /// One record per line, flushed immediately so interrupted runs keep
  /// every completed iteration.
  void append(const nlohmann::json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) throw RuntimeFailure("write failed: " + path_);
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

/// Strict reader: throws ConfigError on a missing file, bad header, wrong
/// kind, unknown schema, or any malformed record line. Callers that want
/// per-file skip semantics catch and move on.
inline JsonlFile read_jsonl(const std::string& path, const std::string& expect_kind = "") {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  JsonlFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
    }
    if (lineno == 1) {
      if (!j.is_object() || !j.contains("schema") || !j.contains("kind"))
        throw ConfigError(path + ": first line is not a schema header");
      if (j["schema"].get<int>() > kSchemaVersion)
        throw ConfigError(path + ": schema newer than this build understands");
      if (!expect_kind.empty() && j["kind"].get<std::string>() != expect_kind)
        throw ConfigError(path + ": expected kind '" + expect_kind + "', found '" +
                          j["kind"].get<std::string>() + "'");
      file.header = std::move(j);
    } else {
      file.records.push_back(std::move(j));
    }
  }
  if (file.header.is_null()) throw ConfigError(path + ": empty file, no header");
  return file;
}

// ---------------------------------------------------------------------------
// Episode persistence: frames as JSON-lines plus a summary object.

inline nlohmann::json episode_meta(const simulate::EpisodeTrace& t) {
  return {{"dt", t.dt},
          {"scenario", world::scenario_name(t.scenario)},
          {"command", command_name(t.command)}};
}

inline nlohmann::json episode_summary(const simulate::EpisodeTrace& t) {
  nlohmann::json j = episode_meta(t);
  j["frames"] = t.frames.size();
  j["reached_goal"] = t.reached_goal;
  j["crossed_gate"] = t.crossed_gate;
  j["end_reason"] = t.end_reason;
  return j;
}

inline void write_episode(const std::string& path, const simulate::EpisodeTrace& t) {
  nlohmann::json meta = episode_meta(t);
  meta["summary"] = episode_summary(t);
  JsonlWriter w(path, "episode", meta);
  for (const simulate::Frame& f : t.frames) w.append(f);
}

inline simulate::EpisodeTrace read_episode(const std::string& path) {
  const JsonlFile file = read_jsonl(path, "episode");
  simulate::EpisodeTrace t;
  t.dt = file.header.at("dt").get<double>();
  t.scenario = world::scenario_from_name(file.header.at("scenario").get<std::string>());
  t.command = command_from_name(file.header.at("command").get<std::string>());
  const nlohmann::json& s = file.header.at("summary");
  t.reached_goal = s.at("reached_goal").get<bool>();
  t.crossed_gate = s.at("crossed_gate").get<int>();
  t.end_reason = s.at("end_reason").get<std::string>();
  t.frames.reserve(file.records.size());
  for (const nlohmann::json& r : file.records) t.frames.push_back(r.get<simulate::Frame>());
  return t;
}

// ---------------------------------------------------------------------------
// Image dumps. PGM for grayscale observations, PNG (zlib-compressed, filter
// 0) for RGBA canvases.

inline void write_pgm(const std::string& path, int width, int height,
                      const std::vector<std::uint8_t>& gray) {
  if (width < 1 || height < 1 ||
      gray.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw ConfigError("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open for writing: " + path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
  if (!out) throw RuntimeFailure("write failed: " + path);
}

inline void write_pgm(const std::string& path, const world::Observation& obs) {
  std::vector<std::uint8_t> gray(obs.intensity.size());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const float v = std::clamp(obs.intensity[i], 0.0f, 1.0f);
    gray[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  write_pgm(path, obs.cols, obs.rows, gray);
}

namespace detail {

inline void png_chunk(std::ofstream& out, const char type[4], const std::uint8_t* data,
                      std::uint32_t n) {
  const auto be = [](std::uint32_t v) {
    return std::array<std::uint8_t, 4>{static_cast<std::uint8_t>(v >> 24),
                                       static_cast<std::uint8_t>(v >> 16),
                                       static_cast<std::uint8_t>(v >> 8),
                                       static_cast<std::uint8_t>(v)};
  };
  const auto len = be(n);
  out.write(reinterpret_cast<const char*>(len.data()), 4);
  out.write(type, 4);
  if (n) out.write(reinterpret_cast<const char*>(data), n);
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (n) crc = crc32(crc, data, n);
  const auto tail = be(crc);
  out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace detail

inline void write_png_rgba(const std::string& path, int width, int height,
                           const std::vector<std::uint8_t>& rgba) {
  if (width < 1 || height < 1 ||
      rgba.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 4)
    throw ConfigError("write_png_rgba: size mismatch");

  // Raw image stream: each scanline prefixed by filter byte 0 (None).
  const std::size_t stride = static_cast<std::size_t>(width) * 4;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = rgba.data() + static_cast<std::size_t>(y) * stride;
    raw.insert(raw.end(), row, row + stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> idat(bound);
  if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                Z_BEST_COMPRESSION) != Z_OK)
    throw RuntimeFailure("png: zlib compression failed");
  idat.resize(bound);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open for writing: " + path);
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::uint8_t ihdr[13] = {};
  const auto put_be = [&](int off, std::uint32_t v) {
    ihdr[off] = static_cast<std::uint8_t>(v >> 24);
    ihdr[off + 1] = static_cast<std::uint8_t>(v >> 16);
    ihdr[off + 2] = static_cast<std::uint8_t>(v >> 8);
    ihdr[off + 3] = static_cast<std::uint8_t>(v);
  };
  put_be(0, static_cast<std::uint32_t>(width));
  put_be(4, static_cast<std::uint32_t>(height));
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 6;   // color type RGBA
  detail::png_chunk(out, "IHDR", ihdr, 13);
  detail::png_chunk(out, "IDAT", idat.data(), static_cast<std::uint32_t>(idat.size()));
  detail::png_chunk(out, "IEND", nullptr, 0);
  if (!out) throw RuntimeFailure("write failed: " + path);
}

inline void write_png(const std::string& path, const pattern::Canvas& canvas) {
  write_png_rgba(path, canvas.width, canvas.height, canvas.to_rgba8());
}

}  // namespace advmark::io
