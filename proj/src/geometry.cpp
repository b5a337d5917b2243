#include "smolhom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smolhom/errors.hpp"

namespace smolhom {

double polygon_area(const std::vector<Vec2>& poly) {
  double twice = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    twice += cross(p, q);
  }
  return 0.5 * twice;
}

Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
  double cx = 0.0, cy = 0.0, twice = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    const double w = cross(p, q);
    twice += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  const double area6 = 3.0 * twice;
  return {cx / area6, cy / area6};
}

namespace {

bool segments_properly_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

void validate_polygon(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) throw ConfigError("polygon inclusion needs >= 3 vertices");
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // skip segments sharing an endpoint
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_properly_intersect(poly[i], poly[(i + 1) % n], poly[j],
                                      poly[(j + 1) % n])) {
        throw ConfigError("polygon inclusion is self-intersecting");
      }
    }
  }
}

}  // namespace

CellGeometry build_cell_geometry(const InclusionShape& shape) {
  CellGeometry g;
  g.inclusion = shape;
  switch (shape.kind) {
    case InclusionKind::none: {
      g.area_inclusion = 0.0;
      g.area_solid = 1.0;
      g.margin = 0.0;
      return g;
    }
    case InclusionKind::disk: {
      if (shape.radius <= 0.0) throw ConfigError("empty inclusion: disk radius must be > 0");
      const Vec2 c = shape.center;
      const double r = shape.radius;
      const double margin =
          std::min(std::min(c.x - r, 1.0 - c.x - r), std::min(c.y - r, 1.0 - c.y - r));
      if (margin < kCellMargin) {
        std::ostringstream os;
        os << "inclusion touches cell boundary: clearance " << margin
           << " below required margin " << kCellMargin;
        throw ConfigError(os.str());
      }
      g.area_inclusion = M_PI * r * r;
      g.area_solid = 1.0 - g.area_inclusion;
      g.margin = margin;
      return g;
    }
    case InclusionKind::polygon: {
      validate_polygon(shape.vertices);
      double area = polygon_area(shape.vertices);
      if (area < 0.0) throw ConfigError("polygon inclusion must be counter-clockwise");
      if (area == 0.0) throw ConfigError("empty inclusion: polygon has zero area");
      double margin = 1.0;
      for (const Vec2& v : shape.vertices) {
        margin = std::min(margin, std::min(std::min(v.x, 1.0 - v.x), std::min(v.y, 1.0 - v.y)));
      }
      if (margin < kCellMargin) {
        std::ostringstream os;
        os << "inclusion touches cell boundary: clearance " << margin
           << " below required margin " << kCellMargin;
        throw ConfigError(os.str());
      }
      g.area_inclusion = area;
      g.area_solid = 1.0 - area;
      g.margin = margin;
      return g;
    }
  }
  throw ConfigError("unknown inclusion kind");
}

PerforatedDomain build_perforated_domain(const CellGeometry& geom, double width,
                                         double height, double epsilon,
                                         double z_extent) {
  if (width <= 0.0 || height <= 0.0) throw ConfigError("macro rectangle must have positive sides");
  if (epsilon <= 0.0 || epsilon > 1.0) throw ConfigError("epsilon must lie in (0, 1]");
  const double inv = 1.0 / epsilon;
  if (std::abs(inv - std::round(inv)) > 1e-9 * inv) {
    throw ConfigError("epsilon must be the reciprocal of a positive integer");
  }
  if (z_extent < 0.0) throw ConfigError("z extent must be >= 0");

  auto tile_count = [&](double side, const char* name) {
    const double ratio = side / epsilon;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
      std::ostringstream os;
      os << "macro rectangle " << name << " = " << side
         << " is not an integer multiple of epsilon = " << epsilon;
      throw ConfigError(os.str());
    }
    return static_cast<int>(rounded);
  };

  PerforatedDomain dom;
  dom.cell = geom;
  dom.epsilon = epsilon;
  dom.width = width;
  dom.height = height;
  dom.z_extent = z_extent;
  dom.tiles_x = tile_count(width, "width");
  dom.tiles_y = tile_count(height, "height");

  // Exact tiling: with closure(X) strictly inside Y, every complete tile
  // contains its translated inclusion.
  if (geom.has_inclusion()) {
    dom.inclusion_cells.reserve(static_cast<std::size_t>(dom.tiles_x) * dom.tiles_y);
    for (int ky = 0; ky < dom.tiles_y; ++ky) {
      for (int kx = 0; kx < dom.tiles_x; ++kx) {
        dom.inclusion_cells.push_back({kx, ky});
      }
    }
  }
  return dom;
}

}  // namespace smolhom
