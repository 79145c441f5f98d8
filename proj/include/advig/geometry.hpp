#pragma once

// Geometric perturbation primitives: parameter types for line sets, polygons
// and ellipses, exact integer rasterization, mask clipping, and the
// feasibility clamp used by the optimizer. All rasterizers are pure
// functions of their inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <variant>
#include <vector>

#include "advig/detail/rng.hpp"
#include "advig/error.hpp"

namespace advig {

/// Integer pixel coordinate; x is the column, y the row.
struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline bool point_less(const Point& a, const Point& b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

/// Axis-aligned rectangle on the pixel grid, half-open: it covers pixels
/// with x1 <= x < x2 and y1 <= y < y2.
struct Rect {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  bool empty() const { return x2 <= x1 || y2 <= y1; }
  long long area() const {
    return empty() ? 0 : static_cast<long long>(width()) * height();
  }
  bool contains(int x, int y) const {
    return x >= x1 && x < x2 && y >= y1 && y < y2;
  }
  double diagonal() const {
    const double w = width(), h = height();
    return std::sqrt(w * w + h * h);
  }
  Rect intersect(const Rect& o) const {
    Rect r{std::max(x1, o.x1), std::max(y1, o.y1), std::min(x2, o.x2),
           std::min(y2, o.y2)};
    if (r.empty()) return Rect{};
    return r;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Width and height of the frame a shape is rasterized against.
struct FrameDims {
  int width = 0;
  int height = 0;
  bool valid() const { return width > 0 && height > 0; }
  Rect as_rect() const { return Rect{0, 0, width, height}; }
  friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

/// Per-channel fill intensity of a perturbation. Grayscale (all channels
/// equal) by default; black is the default attack color.
struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Color&, const Color&) = default;
};

inline constexpr int kDefaultLineThickness = 3;

/// n line segments given as 2n endpoints; consecutive pairs form a segment.
struct LineSetParams {
  std::vector<Point> endpoints;
  int thickness = kDefaultLineThickness;
  friend bool operator==(const LineSetParams&, const LineSetParams&) = default;
};

/// Filled polygon with k >= 3 vertices in list order.
struct PolygonParams {
  std::vector<Point> vertices;
  friend bool operator==(const PolygonParams&, const PolygonParams&) = default;
};

/// Axis-aligned filled ellipse: center plus horizontal/vertical semi-axes.
struct EllipseParams {
  Point center;
  int semi_axis_h = 1;
  int semi_axis_v = 1;
  friend bool operator==(const EllipseParams&, const EllipseParams&) = default;
};

enum class ShapeKind { lines, polygon, ellipse };

inline const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::lines: return "lines";
    case ShapeKind::polygon: return "polygon";
    case ShapeKind::ellipse: return "ellipse";
  }
  return "unknown";
}

inline ShapeKind shape_kind_from_string(const std::string& s) {
  if (s == "lines") return ShapeKind::lines;
  if (s == "polygon") return ShapeKind::polygon;
  if (s == "ellipse") return ShapeKind::ellipse;
  throw InvalidParameter("unknown shape kind: " + s);
}

/// A shape family instantiated with its structural knobs: how many lines,
/// how many polygon edges, the stroke thickness. Fixes the search-space
/// dimension of the optimizer.
struct ShapeFamily {
  ShapeKind kind = ShapeKind::ellipse;
  int line_count = 2;
  int edges = 3;
  int thickness = kDefaultLineThickness;

  int dimension() const {
    switch (kind) {
      case ShapeKind::lines: return 4 * line_count;
      case ShapeKind::polygon: return 2 * edges;
      case ShapeKind::ellipse: return 4;
    }
    return 0;
  }
  void validate() const {
    if (kind == ShapeKind::lines && line_count < 1)
      throw InvalidParameter("line count must be >= 1");
    if (kind == ShapeKind::polygon && edges < 3)
      throw InvalidParameter("polygon needs >= 3 edges");
    if (thickness < 1) throw InvalidParameter("thickness must be >= 1");
  }
};

using ShapeParams = std::variant<LineSetParams, PolygonParams, EllipseParams>;

/// The optimizer's search point: one shape parameterization plus the fill
/// color fused into the frame.
struct PerturbationSpec {
  ShapeParams shape = EllipseParams{};
  Color color{};
  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

inline ShapeKind kind_of(const PerturbationSpec& spec) {
  if (std::holds_alternative<LineSetParams>(spec.shape)) return ShapeKind::lines;
  if (std::holds_alternative<PolygonParams>(spec.shape)) return ShapeKind::polygon;
  return ShapeKind::ellipse;
}

/// Binary region confining the perturbation; true = pixel may be perturbed.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, W*H entries

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  static Mask full(int w, int h) {
    return Mask{w, h, std::vector<std::uint8_t>(
                          static_cast<std::size_t>(w) * h, 1)};
  }
  static Mask from_rect(int w, int h, const Rect& r) {
    Mask m{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)};
    const Rect c = r.intersect(Rect{0, 0, w, h});
    for (int y = c.y1; y < c.y2; ++y)
      for (int x = c.x1; x < c.x2; ++x)
        m.bits[static_cast<std::size_t>(y) * w + x] = 1;
    return m;
  }
};

/// Tight bounding rectangle of the mask's true pixels; empty Rect when the
/// mask admits no pixel at all.
inline Rect mask_bbox(const Mask& mask) {
  int minx = mask.width, miny = mask.height, maxx = -1, maxy = -1;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) {
        minx = std::min(minx, x);
        miny = std::min(miny, y);
        maxx = std::max(maxx, x);
        maxy = std::max(maxy, y);
      }
  if (maxx < 0) return Rect{};
  return Rect{minx, miny, maxx + 1, maxy + 1};
}

/// Deduplicated set of in-bounds pixels, kept sorted row-major so identical
/// sets compare equal. Carries the bounds it was rasterized against.
struct PixelSet {
  int width = 0;
  int height = 0;
  std::vector<Point> pixels;

  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  static PixelSet from_points(FrameDims dims, std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), point_less);
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return PixelSet{dims.width, dims.height, std::move(pts)};
  }
  friend bool operator==(const PixelSet&, const PixelSet&) = default;
};

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

namespace detail {

// Round num/den (den > 0) to the nearest integer, halves away from zero.
inline long long round_div_half_away(long long num, long long den) {
  return (2 * num + (num >= 0 ? den : -den)) / (2 * den);
}

// Digital line between two integer endpoints: step along the major axis,
// minor coordinate rounded half-away-from-zero. Exact integer arithmetic.
template <typename Emit>
void trace_segment(Point a, Point b, Emit&& emit) {
  const int dx = b.x - a.x, dy = b.y - a.y;
  const int adx = std::abs(dx), ady = std::abs(dy);
  if (adx == 0 && ady == 0) {
    emit(a);
    return;
  }
  if (adx >= ady) {
    const int sx = dx > 0 ? 1 : -1;
    for (int k = 0; k <= adx; ++k) {
      const long long off = round_div_half_away(
          static_cast<long long>(k) * dy, adx);
      emit(Point{a.x + sx * k, a.y + static_cast<int>(off)});
    }
  } else {
    const int sy = dy > 0 ? 1 : -1;
    for (int k = 0; k <= ady; ++k) {
      const long long off = round_div_half_away(
          static_cast<long long>(k) * dx, ady);
      emit(Point{a.x + static_cast<int>(off), a.y + sy * k});
    }
  }
}

// Exact test: does (px,py) lie on the closed segment a-b?
inline bool on_segment(int px, int py, Point a, Point b) {
  const long long cross = static_cast<long long>(b.x - a.x) * (py - a.y) -
                          static_cast<long long>(b.y - a.y) * (px - a.x);
  if (cross != 0) return false;
  return px >= std::min(a.x, b.x) && px <= std::max(a.x, b.x) &&
         py >= std::min(a.y, b.y) && py <= std::max(a.y, b.y);
}

// Even-odd interior test with a +x ray, exact integer arithmetic. Boundary
// pixels are handled separately via on_segment.
inline bool even_odd_inside(const std::vector<Point>& vs, int px, int py) {
  bool inside = false;
  const std::size_t n = vs.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& pi = vs[i];
    const Point& pj = vs[j];
    if ((pi.y > py) != (pj.y > py)) {
      // px < pi.x + (py - pi.y) * (pj.x - pi.x) / (pj.y - pi.y), cross
      // multiplied by (pj.y - pi.y) with the sign folded into the compare.
      const long long lhs = static_cast<long long>(px - pi.x) * (pj.y - pi.y);
      const long long rhs = static_cast<long long>(py - pi.y) * (pj.x - pi.x);
      const bool crosses = (pj.y > pi.y) ? (lhs < rhs) : (lhs > rhs);
      if (crosses) inside = !inside;
    }
  }
  return inside;
}

}  // namespace detail

/// Rasterize a line set: union of each segment's digital line, dilated by a
/// square structuring element of side `thickness`, clipped to bounds.
inline PixelSet rasterize_lines(const LineSetParams& params, FrameDims bounds) {
  if (params.endpoints.empty())
    throw InvalidParameter("line set has no endpoints");
  if (params.endpoints.size() % 2 != 0)
    throw InvalidParameter("line set endpoint list must pair up");
  if (params.thickness < 1)
    throw InvalidParameter("line thickness must be >= 1");
  if (!bounds.valid()) throw InvalidParameter("bounds must be positive");

  std::vector<Point> base;
  for (std::size_t s = 0; s + 1 < params.endpoints.size(); s += 2)
    detail::trace_segment(params.endpoints[s], params.endpoints[s + 1],
                          [&](Point p) { base.push_back(p); });

  // Square structuring element of side t: offsets -(t-1)/2 .. t/2.
  const int t = params.thickness;
  const int lo = -((t - 1) / 2), hi = t / 2;
  std::vector<Point> dilated;
  dilated.reserve(base.size() * static_cast<std::size_t>(t) * t);
  for (const Point& p : base)
    for (int oy = lo; oy <= hi; ++oy)
      for (int ox = lo; ox <= hi; ++ox) {
        const int x = p.x + ox, y = p.y + oy;
        if (x >= 0 && x < bounds.width && y >= 0 && y < bounds.height)
          dilated.push_back(Point{x, y});
      }
  return PixelSet::from_points(bounds, std::move(dilated));
}

/// Rasterize a filled polygon. A pixel belongs iff its center is inside by
/// the even-odd rule or lies on an edge, so collinear and degenerate vertex
/// sets produce their natural thin sets.
inline PixelSet rasterize_polygon(const PolygonParams& params,
                                  FrameDims bounds) {
  if (params.vertices.size() < 3)
    throw InvalidParameter("polygon needs at least 3 vertices");
  if (!bounds.valid()) throw InvalidParameter("bounds must be positive");

  int minx = params.vertices[0].x, maxx = minx;
  int miny = params.vertices[0].y, maxy = miny;
  for (const Point& v : params.vertices) {
    minx = std::min(minx, v.x);
    maxx = std::max(maxx, v.x);
    miny = std::min(miny, v.y);
    maxy = std::max(maxy, v.y);
  }
  const Rect scan =
      Rect{minx, miny, maxx + 1, maxy + 1}.intersect(bounds.as_rect());

  std::vector<Point> pts;
  const auto& vs = params.vertices;
  const std::size_t n = vs.size();
  for (int y = scan.y1; y < scan.y2; ++y)
    for (int x = scan.x1; x < scan.x2; ++x) {
      bool member = detail::even_odd_inside(vs, x, y);
      for (std::size_t i = 0, j = n - 1; !member && i < n; j = i++)
        member = detail::on_segment(x, y, vs[j], vs[i]);
      if (member) pts.push_back(Point{x, y});
    }
  return PixelSet::from_points(bounds, std::move(pts));
}

/// Rasterize a filled axis-aligned ellipse: pixel (x,y) is included iff
/// ((x-cx)/L1)^2 + ((y-cy)/L2)^2 <= 1, evaluated exactly in integers.
inline PixelSet rasterize_ellipse(const EllipseParams& params,
                                  FrameDims bounds) {
  if (params.semi_axis_h < 1 || params.semi_axis_v < 1)
    throw InvalidParameter("ellipse semi-axes must be >= 1");
  if (!bounds.valid()) throw InvalidParameter("bounds must be positive");

  const long long l1 = params.semi_axis_h, l2 = params.semi_axis_v;
  const long long l1sq = l1 * l1, l2sq = l2 * l2;
  const Rect scan = Rect{params.center.x - params.semi_axis_h,
                         params.center.y - params.semi_axis_v,
                         params.center.x + params.semi_axis_h + 1,
                         params.center.y + params.semi_axis_v + 1}
                        .intersect(bounds.as_rect());

  std::vector<Point> pts;
  for (int y = scan.y1; y < scan.y2; ++y) {
    const long long dy = y - params.center.y;
    for (int x = scan.x1; x < scan.x2; ++x) {
      const long long dx = x - params.center.x;
      const auto lhs = static_cast<unsigned __int128>(dx * dx) * l2sq +
                       static_cast<unsigned __int128>(dy * dy) * l1sq;
      if (lhs <= static_cast<unsigned __int128>(l1sq) * l2sq)
        pts.push_back(Point{x, y});
    }
  }
  return PixelSet::from_points(bounds, std::move(pts));
}

/// Dispatch on the active shape variant.
inline PixelSet rasterize(const ShapeParams& shape, FrameDims bounds) {
  return std::visit(
      [&](const auto& p) -> PixelSet {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LineSetParams>)
          return rasterize_lines(p, bounds);
        else if constexpr (std::is_same_v<T, PolygonParams>)
          return rasterize_polygon(p, bounds);
        else
          return rasterize_ellipse(p, bounds);
      },
      shape);
}

/// Intersection of a rasterized shape with a mask. Output is a subset of
/// both inputs.
inline PixelSet clip_to_mask(const PixelSet& shape_pixels, const Mask& mask) {
  if (mask.width != shape_pixels.width || mask.height != shape_pixels.height)
    throw InvalidParameter("mask dimensions do not match rasterization bounds");
  std::vector<Point> kept;
  kept.reserve(shape_pixels.pixels.size());
  for (const Point& p : shape_pixels.pixels)
    if (mask.at(p.x, p.y)) kept.push_back(p);
  return PixelSet{shape_pixels.width, shape_pixels.height, std::move(kept)};
}

// ---------------------------------------------------------------------------
// Feasibility: clamping and random generation over a mask bounding box
// ---------------------------------------------------------------------------

namespace detail {

inline int clamp_int(int v, int lo, int hi) {
  return std::max(lo, std::min(hi, v));
}

inline Point clamp_point(Point p, const Rect& bbox) {
  return Point{clamp_int(p.x, bbox.x1, bbox.x2 - 1),
               clamp_int(p.y, bbox.y1, bbox.y2 - 1)};
}

inline int max_semi_axis(int side) { return std::max(1, side / 2); }

}  // namespace detail

/// Clamp every coordinate of a spec into the mask bounding box; ellipse
/// semi-axes are clamped to [1, side/2]. Idempotent.
inline PerturbationSpec clamp_params(PerturbationSpec spec, const Rect& mask_bbox) {
  if (mask_bbox.empty()) throw InvalidParameter("mask bounding box is empty");
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LineSetParams>) {
          for (Point& q : p.endpoints) q = detail::clamp_point(q, mask_bbox);
        } else if constexpr (std::is_same_v<T, PolygonParams>) {
          for (Point& q : p.vertices) q = detail::clamp_point(q, mask_bbox);
        } else {
          p.center = detail::clamp_point(p.center, mask_bbox);
          p.semi_axis_h = detail::clamp_int(
              p.semi_axis_h, 1, detail::max_semi_axis(mask_bbox.width()));
          p.semi_axis_v = detail::clamp_int(
              p.semi_axis_v, 1, detail::max_semi_axis(mask_bbox.height()));
        }
      },
      spec.shape);
  return spec;
}

/// Draw a uniformly random spec of the given family inside the mask
/// bounding box. Deterministic for a fixed seed: coordinates are drawn
/// x-then-y in listing order, ellipse as center, then horizontal, then
/// vertical semi-axis.
inline PerturbationSpec random_params(const ShapeFamily& family,
                                      const Rect& mask_bbox,
                                      std::uint64_t rng_seed) {
  if (mask_bbox.empty()) throw InvalidParameter("mask bounding box is empty");
  family.validate();
  detail::Rng rng(rng_seed);
  const auto draw_point = [&] {
    const int x = rng.uniform_int(mask_bbox.x1, mask_bbox.x2 - 1);
    const int y = rng.uniform_int(mask_bbox.y1, mask_bbox.y2 - 1);
    return Point{x, y};
  };

  PerturbationSpec spec;
  switch (family.kind) {
    case ShapeKind::lines: {
      LineSetParams p;
      p.thickness = family.thickness;
      p.endpoints.resize(static_cast<std::size_t>(2) * family.line_count);
      for (Point& q : p.endpoints) q = draw_point();
      spec.shape = std::move(p);
      break;
    }
    case ShapeKind::polygon: {
      PolygonParams p;
      p.vertices.resize(static_cast<std::size_t>(family.edges));
      for (Point& q : p.vertices) q = draw_point();
      spec.shape = std::move(p);
      break;
    }
    case ShapeKind::ellipse: {
      EllipseParams p;
      p.center = draw_point();
      p.semi_axis_h =
          rng.uniform_int(1, detail::max_semi_axis(mask_bbox.width()));
      p.semi_axis_v =
          rng.uniform_int(1, detail::max_semi_axis(mask_bbox.height()));
      spec.shape = p;
      break;
    }
  }
  return spec;
}

}  // namespace advig
