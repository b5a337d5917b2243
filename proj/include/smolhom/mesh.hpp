#ifndef SMOLHOM_MESH_HPP_
#define SMOLHOM_MESH_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "smolhom/geometry.hpp"

namespace smolhom {

enum class Region : std::uint8_t { solid = 0, inclusion = 1 };

enum class BoundaryTag : std::uint8_t { none = 0, interface = 1, outer = 2 };

struct BoundaryEdge {
  int a = -1;
  int b = -1;
  BoundaryTag tag = BoundaryTag::none;
};

// Conforming P1 triangle mesh. All triangles are stored counter-clockwise;
// boundary edges are oriented with the mesh interior on their left.
struct TriMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Region> region;  // one tag per triangle
  std::vector<BoundaryEdge> boundary_edges;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  bool empty() const { return triangles.empty(); }

  double triangle_area(int t) const {
    const auto& tri = triangles[t];
    return 0.5 * cross(vertices[tri[1]] - vertices[tri[0]],
                       vertices[tri[2]] - vertices[tri[0]]);
  }
  double total_area() const;
  double max_edge_length() const;
  // Total length of boundary edges carrying `tag`.
  double boundary_length(BoundaryTag tag) const;
  // Vertex indices touched by boundary edges with `tag`, ascending.
  std::vector<int> boundary_vertices(BoundaryTag tag) const;
};

// Master/slave identification of periodic boundary vertices on opposite
// faces of the unit cell; every slave has exactly one master and corners
// collapse onto a single master.
struct PeriodicMap {
  std::vector<std::pair<int, int>> pairs;  // (slave, master)
};

struct CellMeshes {
  TriMesh solid;       // over Z = Y \ X
  TriMesh inclusion;   // over X (empty when the cell has no inclusion)
  PeriodicMap periodic;  // on the solid mesh
};

CellMeshes mesh_cell(const CellGeometry& geom, double h);

// Provenance of a tiled vertex: which lattice tile and which cell-mesh
// vertex it is the image of. Shared tile-boundary vertices keep the first
// owner encountered.
struct TileRef {
  int tile = -1;     // index into PerforatedDomain tile ordering (ky*tiles_x+kx)
  int cell_vertex = -1;
};

struct PerforatedMeshes {
  TriMesh bulk;        // over D_eps (solid part, perforated)
  TriMesh inclusions;  // over G_eps (union of scaled inclusions)
  std::vector<TileRef> bulk_provenance;
  std::vector<TileRef> inclusion_provenance;
  double cell_h = 0.0;  // resolution of the generating cell mesh
};

PerforatedMeshes mesh_perforated(const PerforatedDomain& dom, double h);

// Structured triangulation of [0,w] x [0,h_rect] with nx x ny cells and
// alternating diagonals; boundary edges tagged `outer`.
struct RectMesh {
  TriMesh mesh;
  double width = 0.0;
  double height = 0.0;
  int nx = 0;
  int ny = 0;

  int vertex_index(int i, int j) const { return j * (nx + 1) + i; }
  // P1 interpolation stencil at point p: three vertex indices and weights.
  void locate(Vec2 p, std::array<int, 3>& verts, std::array<double, 3>& w) const;
};

RectMesh build_rect_mesh(double width, double height, int nx, int ny);

// Node pairing between two meshes along their conforming interface, with
// trapezoid quadrature weights (half the adjacent interface edge length).
// Built once and shared by both transmission terms so the same quadrature
// values enter the u- and v-equations.
struct InterfacePairing {
  std::vector<int> inclusion_node;  // vertex in the inclusion-side mesh
  std::vector<int> solid_node;      // matching vertex in the solid-side mesh
  std::vector<double> weight;

  std::size_t size() const { return weight.size(); }
};

InterfacePairing pair_interfaces(const TriMesh& inclusion_side, const TriMesh& solid_side);

// Trapezoid weights for the interface of a single mesh (used by the cell
// limit problem where only the inclusion side carries a PDE).
struct InterfaceQuadrature {
  std::vector<int> node;
  std::vector<double> weight;
  std::size_t size() const { return weight.size(); }
};

InterfaceQuadrature interface_quadrature(const TriMesh& mesh);

// Structural mesh validation: positive areas, conforming edges, closed
// interface polylines. Throws MeshError on violation.
void validate_mesh(const TriMesh& mesh, const char* label);

}  // namespace smolhom

#endif  // SMOLHOM_MESH_HPP_
