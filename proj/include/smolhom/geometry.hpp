#ifndef SMOLHOM_GEOMETRY_HPP_
#define SMOLHOM_GEOMETRY_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace smolhom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }

enum class InclusionKind { none, disk, polygon };

// Shape descriptor for the inclusion X inside the unit cell Y = [0,1]^2.
struct InclusionShape {
  InclusionKind kind = InclusionKind::none;
  Vec2 center{0.5, 0.5};              // disk center
  double radius = 0.0;                // disk radius
  std::vector<Vec2> vertices;         // simple polygon, CCW
};

// Unit periodicity cell: Y = [0,1]^2, inclusion X with boundary Gamma,
// solid part Z = Y \ X.
struct CellGeometry {
  InclusionShape inclusion;
  double area_inclusion = 0.0;  // |X|
  double area_solid = 1.0;      // |Z| = 1 - |X|
  double margin = 0.0;          // distance from X to the cell boundary

  bool has_inclusion() const { return inclusion.kind != InclusionKind::none; }
};

// Minimum admissible clearance between the inclusion closure and the cell
// boundary.
inline constexpr double kCellMargin = 1e-6;

// D tiled by eps-cells, every complete tile carrying one scaled inclusion.
// The macro rectangle is anchored at the origin: D = [0,width] x [0,height].
struct PerforatedDomain {
  CellGeometry cell;
  double epsilon = 1.0;  // 1/n for a positive integer n
  double width = 1.0;
  double height = 1.0;
  double z_extent = 0.0;  // L; 0 means pure 2D mode
  int tiles_x = 1;
  int tiles_y = 1;
  std::vector<std::array<int, 2>> inclusion_cells;  // lattice indices k
};

CellGeometry build_cell_geometry(const InclusionShape& shape);

PerforatedDomain build_perforated_domain(const CellGeometry& geom, double width,
                                         double height, double epsilon,
                                         double z_extent);

// Polygon helpers (exposed for tests).
double polygon_area(const std::vector<Vec2>& poly);
Vec2 polygon_centroid(const std::vector<Vec2>& poly);

}  // namespace smolhom

#endif  // SMOLHOM_GEOMETRY_HPP_
