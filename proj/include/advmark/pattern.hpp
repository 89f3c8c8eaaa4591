#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "advmark/errors.hpp"
#include "advmark/geometry.hpp"

namespace advmark::pattern {

enum class FamilyKind { SingleLine, DoubleLine, TwoLine, NLines };

/// An attack family: how many lines are drawn and which of their attributes
/// are free parameters. SingleLine varies (position, rotation); DoubleLine
/// adds the gap between two parallel lines; TwoLine drops the parallel
/// constraint (position, rotation per line); NLines frees every attribute of
/// every line (position, rotation, length, width, gray, opacity).
struct PatternFamily {
  FamilyKind kind = FamilyKind::SingleLine;
  int n = 1;  // line count, meaningful for NLines only

  static PatternFamily single_line() { return {FamilyKind::SingleLine, 1}; }
  static PatternFamily double_line() { return {FamilyKind::DoubleLine, 2}; }
  static PatternFamily two_line() { return {FamilyKind::TwoLine, 2}; }
  static PatternFamily n_lines(int n) { return {FamilyKind::NLines, n}; }

  int dimension() const {
    switch (kind) {
      case FamilyKind::SingleLine: return 2;
      case FamilyKind::DoubleLine: return 3;
      case FamilyKind::TwoLine: return 4;
      case FamilyKind::NLines: return 6 * n;
    }
    return 0;
  }

  std::string name() const {
    switch (kind) {
      case FamilyKind::SingleLine: return "single_line";
      case FamilyKind::DoubleLine: return "double_line";
      case FamilyKind::TwoLine: return "two_line";
      case FamilyKind::NLines: return "n_lines";
    }
    return "?";
  }

  bool operator==(const PatternFamily& o) const {
    return kind == o.kind && (kind != FamilyKind::NLines || n == o.n);
  }
};

/// Fixed attributes of the constrained families (Single/Double/TwoLine draw
/// opaque black lines of constant size; only NLines frees these).
struct LineConstants {
  double length_px = 283.0;
  double width_px = 40.0;
  double gray = 0.0;
  double opacity = 1.0;
};

/// The role a parameter dimension plays, used for bounds and defaults.
enum class DimRole { Position, Rotation, Gap, Length, Width, Gray, Opacity };

inline std::string role_name(DimRole r) {
  switch (r) {
    case DimRole::Position: return "position";
    case DimRole::Rotation: return "rotation";
    case DimRole::Gap: return "gap";
    case DimRole::Length: return "length";
    case DimRole::Width: return "width";
    case DimRole::Gray: return "gray";
    case DimRole::Opacity: return "opacity";
  }
  return "?";
}

inline DimRole role_from_name(const std::string& name) {
  for (DimRole r : {DimRole::Position, DimRole::Rotation, DimRole::Gap, DimRole::Length,
                    DimRole::Width, DimRole::Gray, DimRole::Opacity})
    if (role_name(r) == name) return r;
  throw ConfigError("unknown dimension role: " + name);
}

struct DimBounds {
  DimRole role;
  double lower;
  double upper;
  double grid_step;
};

inline DimBounds default_bounds(DimRole role) {
  switch (role) {
    case DimRole::Position: return {role, 0.0, 200.0, 20.0};
    case DimRole::Rotation: return {role, 0.0, 180.0, 20.0};
    case DimRole::Gap: return {role, 0.0, 100.0, 25.0};
    case DimRole::Length: return {role, 20.0, 283.0, 26.3};
    case DimRole::Width: return {role, 1.0, 40.0, 3.9};
    case DimRole::Gray: return {role, 0.0, 1.0, 0.1};
    case DimRole::Opacity: return {role, 0.0, 1.0, 0.1};
  }
  return {role, 0.0, 1.0, 0.1};
}

/// Search box: per-dimension lower/upper bounds and a grid step.
struct ParamSpace {
  std::vector<DimBounds> dims;

  std::size_t dimension() const { return dims.size(); }

  void check() const {
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const DimBounds& d = dims[i];
      if (!(d.lower < d.upper))
        throw ConfigError("param space dim " + std::to_string(i) + ": lower must be < upper");
      if (!(d.grid_step > 0.0) || d.grid_step > d.upper - d.lower)
        throw ConfigError("param space dim " + std::to_string(i) + ": bad grid step");
    }
  }

  /// Points on the arithmetic grid of dimension i: lower, lower+step, ... <= upper.
  std::size_t grid_count(std::size_t i) const {
    const DimBounds& d = dims[i];
    return static_cast<std::size_t>(
               std::floor((d.upper - d.lower) / d.grid_step + 1e-9)) + 1;
  }

  /// Rescales dimension i's step so its grid has exactly n points.
  ParamSpace& with_grid_count(std::size_t i, std::size_t n) {
    if (n < 2) throw ConfigError("grid count must be >= 2");
    dims[i].grid_step = (dims[i].upper - dims[i].lower) / static_cast<double>(n - 1);
    return *this;
  }

  double normalize(std::size_t i, double v) const {
    return (v - dims[i].lower) / (dims[i].upper - dims[i].lower);
  }
  double denormalize(std::size_t i, double u) const {
    return dims[i].lower + u * (dims[i].upper - dims[i].lower);
  }
};

/// A concrete attack: family plus one value per parameter dimension.
struct PatternParams {
  PatternFamily family;
  std::vector<double> values;
};

/// Verdict of validate(): structurally broken (wrong arity) is distinct from
/// out-of-bounds components.
struct Validity {
  bool ok = false;
  bool structural_mismatch = false;
  std::vector<std::size_t> violations;  // indices of out-of-bounds or non-finite dims
};

inline ParamSpace param_space(const PatternFamily& family) {
  std::vector<DimRole> roles;
  switch (family.kind) {
    case FamilyKind::SingleLine:
      roles = {DimRole::Position, DimRole::Rotation};
      break;
    case FamilyKind::DoubleLine:
      roles = {DimRole::Position, DimRole::Rotation, DimRole::Gap};
      break;
    case FamilyKind::TwoLine:
      roles = {DimRole::Position, DimRole::Rotation, DimRole::Position, DimRole::Rotation};
      break;
    case FamilyKind::NLines: {
      if (family.n < 1) throw ConfigError("NLines requires n >= 1");
      for (int i = 0; i < family.n; ++i) {
        roles.insert(roles.end(), {DimRole::Position, DimRole::Rotation, DimRole::Length,
                                   DimRole::Width, DimRole::Gray, DimRole::Opacity});
      }
      break;
    }
  }
  ParamSpace space;
  space.dims.reserve(roles.size());
  for (DimRole r : roles) space.dims.push_back(default_bounds(r));
  return space;
}

inline Validity validate(const PatternParams& params, const ParamSpace& space) {
  Validity v;
  if (params.values.size() != space.dimension() ||
      params.values.size() != static_cast<std::size_t>(params.family.dimension())) {
    v.structural_mismatch = true;
    return v;
  }
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    const double x = params.values[i];
    if (!std::isfinite(x) || x < space.dims[i].lower || x > space.dims[i].upper)
      v.violations.push_back(i);
  }
  v.ok = v.violations.empty();
  return v;
}

/// 200x200 RGBA canvas, straight (non-premultiplied) alpha, channels in [0,1],
/// row-major with the origin at the top-left pixel.
struct Canvas {
  int width = 200;
  int height = 200;
  std::vector<float> rgba;  // 4 floats per pixel

  Canvas() : rgba(static_cast<std::size_t>(200) * 200 * 4, 0.0f) {}
  Canvas(int w, int h) : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4, 0.0f) {}

  float* px(int x, int y) { return &rgba[(static_cast<std::size_t>(y) * width + x) * 4]; }
  const float* px(int x, int y) const {
    return &rgba[(static_cast<std::size_t>(y) * width + x) * 4];
  }
  float alpha(int x, int y) const { return px(x, y)[3]; }

  /// Mean of the color channels; the composited gray level of the pixel paint.
  float gray(int x, int y) const {
    const float* p = px(x, y);
    return (p[0] + p[1] + p[2]) / 3.0f;
  }

  /// 8-bit RGBA byte stream (row-major, top-left origin), e.g. for PNG export.
  std::vector<std::uint8_t> to_rgba8() const {
    std::vector<std::uint8_t> out(rgba.size());
    for (std::size_t i = 0; i < rgba.size(); ++i) {
      out[i] = static_cast<std::uint8_t>(
          std::lround(std::clamp(rgba[i], 0.0f, 1.0f) * 255.0f));
    }
    return out;
  }
};

namespace detail {

struct LineSpec {
  double position;  // canvas y of the line center, pixels
  double rotation;  // degrees, from the canvas x-axis toward the canvas y-axis
  double length;
  double width;
  double gray;
  double opacity;
  double perp_offset = 0.0;  // extra displacement along the line's own normal
};

/// Source-over compositing of one hard-edged rotated rectangle. A pixel is
/// covered iff its center lies inside the rectangle (closed test).
inline void composite_rect(Canvas& canvas, const LineSpec& line) {
  const double cx = canvas.width / 2.0;
  const double theta = geom::deg_to_rad(line.rotation);
  const geom::Vec2 dir{std::cos(theta), std::sin(theta)};
  const geom::Vec2 nrm{-dir.y, dir.x};
  const geom::Vec2 center = geom::Vec2{cx, line.position} + nrm * line.perp_offset;
  const double hl = line.length / 2.0;
  const double hw = line.width / 2.0;

  // Bounding box of the rotated rectangle, clamped to the canvas.
  const double ex = std::abs(dir.x) * hl + std::abs(nrm.x) * hw;
  const double ey = std::abs(dir.y) * hl + std::abs(nrm.y) * hw;
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - ex)));
  const int x1 = std::min(canvas.width - 1, static_cast<int>(std::ceil(center.x + ex)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - ey)));
  const int y1 = std::min(canvas.height - 1, static_cast<int>(std::ceil(center.y + ey)));

  const float sa = static_cast<float>(line.opacity);
  const float sg = static_cast<float>(line.gray);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const geom::Vec2 p{x + 0.5, y + 0.5};
      const geom::Vec2 d = p - center;
      const double u = geom::dot(d, dir);
      const double v = geom::dot(d, nrm);
      if (std::abs(u) > hl || std::abs(v) > hw) continue;
      float* q = canvas.px(x, y);
      const float da = q[3];
      const float oa = sa + da * (1.0f - sa);
      if (oa > 0.0f) {
        for (int c = 0; c < 3; ++c)
          q[c] = (sg * sa + q[c] * da * (1.0f - sa)) / oa;
      } else {
        q[0] = q[1] = q[2] = 0.0f;
      }
      q[3] = oa;
    }
  }
}

}  // namespace detail

/// Rasterizes a parameter vector into an RGBA canvas. Lines are hard-edged
/// rotated rectangles composited in declaration order over a fully
/// transparent background. The position parameter displaces the line center
/// along the canvas y-axis; rotation is measured from the canvas x-axis.
inline Canvas rasterize(const PatternParams& params, int width = 200, int height = 200,
                        const LineConstants& constants = {}) {
  Validity v = validate(params, param_space(params.family));
  if (v.structural_mismatch)
    throw ConfigError("rasterize: parameter vector arity does not match family");
  Canvas canvas(width, height);
  const std::vector<double>& x = params.values;
  switch (params.family.kind) {
    case FamilyKind::SingleLine:
      detail::composite_rect(canvas, {x[0], x[1], constants.length_px, constants.width_px,
                                      constants.gray, constants.opacity});
      break;
    case FamilyKind::DoubleLine: {
      // Two parallel rectangles; gap is the clear distance between their
      // facing edges, so gap 0 abuts them into a double-width line.
      const double off = (x[2] + constants.width_px) / 2.0;
      for (double s : {-1.0, 1.0}) {
        detail::composite_rect(canvas, {x[0], x[1], constants.length_px, constants.width_px,
                                        constants.gray, constants.opacity, s * off});
      }
      break;
    }
    case FamilyKind::TwoLine:
      for (int i = 0; i < 2; ++i) {
        detail::composite_rect(canvas,
                               {x[2 * i], x[2 * i + 1], constants.length_px, constants.width_px,
                                constants.gray, constants.opacity});
      }
      break;
    case FamilyKind::NLines:
      for (int i = 0; i < params.family.n; ++i) {
        const double* p = &x[6 * i];
        detail::composite_rect(canvas, {p[0], p[1], p[2], p[3], p[4], p[5]});
      }
      break;
  }
  return canvas;
}

/// Cartesian product of the per-dimension arithmetic grids, in lexicographic
/// order with dimension 0 varying slowest.
inline std::vector<PatternParams> grid_points(const PatternFamily& family,
                                              const ParamSpace& space,
                                              std::size_t budget_cap = 200000) {
  space.check();
  if (space.dimension() != static_cast<std::size_t>(family.dimension()))
    throw ConfigError("grid_points: space dimension does not match family");
  std::size_t total = 1;
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    const std::size_t n = space.grid_count(i);
    if (total > budget_cap / n + 1) throw GridTooLargeError("grid exceeds budget cap");
    total *= n;
  }
  if (total > budget_cap) throw GridTooLargeError("grid exceeds budget cap");

  std::vector<PatternParams> out;
  out.reserve(total);
  std::vector<std::size_t> idx(space.dimension(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    PatternParams p;
    p.family = family;
    p.values.resize(space.dimension());
    for (std::size_t i = 0; i < space.dimension(); ++i) {
      p.values[i] = std::min(space.dims[i].lower + static_cast<double>(idx[i]) * space.dims[i].grid_step,
                             space.dims[i].upper);
    }
    out.push_back(std::move(p));
    for (std::size_t i = space.dimension(); i-- > 0;) {
      if (++idx[i] < space.grid_count(i)) break;
      idx[i] = 0;
    }
  }
  return out;
}

/// One i.i.d. uniform draw per dimension, sampled in normalized coordinates so
/// that the draw sequence is invariant to affine rescaling of the bounds.
inline PatternParams sample_uniform(const PatternFamily& family, const ParamSpace& space,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PatternParams p;
  p.family = family;
  p.values.resize(space.dimension());
  for (std::size_t i = 0; i < space.dimension(); ++i)
    p.values[i] = space.denormalize(i, u01(rng));
  return p;
}

inline PatternParams sample_uniform(const PatternFamily& family, const ParamSpace& space,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_uniform(family, space, rng);
}

}  // namespace advmark::pattern
