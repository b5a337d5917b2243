#include "smolhom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "smolhom/errors.hpp"

namespace smolhom {

namespace {

// Exact-coordinate key. Vertices that must coincide (interface rings,
// periodic faces, tile seams) are produced by identical floating-point
// expressions, so bit equality is the right notion here.
struct CoordKey {
  std::uint64_t x;
  std::uint64_t y;
  bool operator==(const CoordKey&) const = default;
};

struct CoordKeyHash {
  std::size_t operator()(const CoordKey& k) const {
    std::uint64_t h = k.x * 0x9e3779b97f4a7c15ULL;
    h ^= k.y + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

CoordKey key_of(Vec2 p) {
  CoordKey k;
  std::memcpy(&k.x, &p.x, sizeof(double));
  std::memcpy(&k.y, &p.y, sizeof(double));
  return k;
}

using CoordMap = std::unordered_map<CoordKey, int, CoordKeyHash>;

// Distance from `center` to the inclusion boundary along direction `dir`
// (unit vector). Disks are exact; polygons are ray-cast segment by segment.
double inclusion_radius_along(const InclusionShape& shape, Vec2 center, Vec2 dir) {
  if (shape.kind == InclusionKind::disk) return shape.radius;
  double best = -1.0;
  int hits = 0;
  const std::size_t n = shape.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = shape.vertices[i];
    const Vec2 b = shape.vertices[(i + 1) % n];
    const Vec2 e = b - a;
    const double denom = cross(dir, e);
    if (std::abs(denom) < 1e-14) continue;  // parallel
    const Vec2 ac = a - center;
    const double t = cross(ac, e) / denom;       // along the ray
    const double s = cross(ac, dir) / denom;     // along the segment
    if (t > 1e-12 && s >= -1e-12 && s <= 1.0 + 1e-12) {
      ++hits;
      best = std::max(best, t);
      if (hits > 1 && std::abs(best - t) > 1e-10) {
        throw MeshError(
            "polygon inclusion is not star-shaped about its centroid; cannot mesh");
      }
    }
  }
  if (best <= 0.0) throw MeshError("ray cast missed the inclusion boundary");
  return best;
}

void push_quad(TriMesh& mesh, int i00, int i01, int i11, int i10, Region reg) {
  // Quad given counter-clockwise; split along the shorter diagonal.
  const double d0 = norm(mesh.vertices[i00] - mesh.vertices[i11]);
  const double d1 = norm(mesh.vertices[i01] - mesh.vertices[i10]);
  if (d0 <= d1) {
    mesh.triangles.push_back({i00, i01, i11});
    mesh.triangles.push_back({i00, i11, i10});
  } else {
    mesh.triangles.push_back({i00, i01, i10});
    mesh.triangles.push_back({i01, i11, i10});
  }
  mesh.region.push_back(reg);
  mesh.region.push_back(reg);
}

// Triangulate the band between two closed rings given as vertex indices with
// angular parameters in [0,1). Both rings must be ordered counter-clockwise
// and roughly aligned at parameter 0.
void stitch_rings(TriMesh& mesh, const std::vector<int>& inner,
                  const std::vector<double>& inner_param,
                  const std::vector<int>& outer,
                  const std::vector<double>& outer_param, Region reg) {
  const std::size_t ni = inner.size();
  const std::size_t no = outer.size();
  std::size_t i = 0, j = 0, ci = 0, cj = 0;
  while (ci < ni || cj < no) {
    const double next_in = ci < ni
        ? inner_param[(i + 1) % ni] + ((i + 1) == ni ? 1.0 : 0.0)
        : std::numeric_limits<double>::infinity();
    const double next_out = cj < no
        ? outer_param[(j + 1) % no] + ((j + 1) == no ? 1.0 : 0.0)
        : std::numeric_limits<double>::infinity();
    if (next_in <= next_out) {
      mesh.triangles.push_back({inner[i], outer[j], inner[(i + 1) % ni]});
      i = (i + 1) % ni;
      ++ci;
    } else {
      mesh.triangles.push_back({inner[i], outer[j], outer[(j + 1) % no]});
      j = (j + 1) % no;
      ++cj;
    }
    mesh.region.push_back(reg);
  }
}

PeriodicMap build_periodic_map(const TriMesh& solid) {
  CoordMap lookup;
  lookup.reserve(solid.vertices.size());
  for (int v = 0; v < solid.num_vertices(); ++v) {
    lookup.emplace(key_of(solid.vertices[v]), v);
  }
  PeriodicMap map;
  for (int v = 0; v < solid.num_vertices(); ++v) {
    const Vec2 p = solid.vertices[v];
    Vec2 canon = p;
    if (canon.x == 1.0) canon.x = 0.0;
    if (canon.y == 1.0) canon.y = 0.0;
    if (canon.x == p.x && canon.y == p.y) continue;
    const auto it = lookup.find(key_of(canon));
    if (it == lookup.end()) {
      std::ostringstream os;
      os << "periodic pairing failed: no master for boundary vertex (" << p.x << ", "
         << p.y << ")";
      throw MeshError(os.str());
    }
    map.pairs.emplace_back(v, it->second);
  }
  std::sort(map.pairs.begin(), map.pairs.end());
  return map;
}

// Boundary edges = edges adjacent to exactly one triangle.
std::vector<std::pair<int, int>> free_edges(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[{a, b}];
    }
  }
  std::vector<std::pair<int, int>> out;
  for (const auto& [edge, c] : count) {
    if (c == 1) out.push_back(edge);
  }
  return out;
}

}  // namespace

double TriMesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < num_triangles(); ++t) a += triangle_area(t);
  return a;
}

double TriMesh::max_edge_length() const {
  double m = 0.0;
  for (const auto& tri : triangles) {
    for (int e = 0; e < 3; ++e) {
      m = std::max(m, norm(vertices[tri[e]] - vertices[tri[(e + 1) % 3]]));
    }
  }
  return m;
}

double TriMesh::boundary_length(BoundaryTag tag) const {
  double len = 0.0;
  for (const auto& be : boundary_edges) {
    if (be.tag == tag) len += norm(vertices[be.a] - vertices[be.b]);
  }
  return len;
}

std::vector<int> TriMesh::boundary_vertices(BoundaryTag tag) const {
  std::vector<int> out;
  for (const auto& be : boundary_edges) {
    if (be.tag == tag) {
      out.push_back(be.a);
      out.push_back(be.b);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RectMesh build_rect_mesh(double width, double height, int nx, int ny) {
  if (nx < 1 || ny < 1) throw MeshError("rectangle mesh needs at least one cell per side");
  RectMesh rm;
  rm.width = width;
  rm.height = height;
  rm.nx = nx;
  rm.ny = ny;
  TriMesh& m = rm.mesh;
  m.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.vertices.push_back({width * i / nx, height * j / ny});
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = rm.vertex_index(i, j);
      const int v10 = rm.vertex_index(i + 1, j);
      const int v01 = rm.vertex_index(i, j + 1);
      const int v11 = rm.vertex_index(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        m.triangles.push_back({v00, v10, v11});
        m.triangles.push_back({v00, v11, v01});
      } else {
        m.triangles.push_back({v00, v10, v01});
        m.triangles.push_back({v10, v11, v01});
      }
      m.region.push_back(Region::solid);
      m.region.push_back(Region::solid);
    }
  }
  for (int i = 0; i < nx; ++i) {
    m.boundary_edges.push_back({rm.vertex_index(i, 0), rm.vertex_index(i + 1, 0), BoundaryTag::outer});
    m.boundary_edges.push_back({rm.vertex_index(i + 1, ny), rm.vertex_index(i, ny), BoundaryTag::outer});
  }
  for (int j = 0; j < ny; ++j) {
    m.boundary_edges.push_back({rm.vertex_index(nx, j), rm.vertex_index(nx, j + 1), BoundaryTag::outer});
    m.boundary_edges.push_back({rm.vertex_index(0, j + 1), rm.vertex_index(0, j), BoundaryTag::outer});
  }
  return rm;
}

void RectMesh::locate(Vec2 p, std::array<int, 3>& verts, std::array<double, 3>& w) const {
  const double hx = width / nx;
  const double hy = height / ny;
  const double cx = std::clamp(p.x, 0.0, width);
  const double cy = std::clamp(p.y, 0.0, height);
  const int i = std::min(static_cast<int>(cx / hx), nx - 1);
  const int j = std::min(static_cast<int>(cy / hy), ny - 1);
  const int base = 2 * (j * nx + i);
  // Try both triangles of the containing grid cell; pick the one whose
  // barycentric coordinates are admissible.
  for (int k = 0; k < 2; ++k) {
    const auto& tri = mesh.triangles[base + k];
    const Vec2 a = mesh.vertices[tri[0]];
    const Vec2 b = mesh.vertices[tri[1]];
    const Vec2 c = mesh.vertices[tri[2]];
    const double det = cross(b - a, c - a);
    const double l1 = cross(Vec2{cx, cy} - a, c - a) / det;
    const double l2 = cross(b - a, Vec2{cx, cy} - a) / det;
    const double l0 = 1.0 - l1 - l2;
    if (k == 1 || (l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12)) {
      verts = {tri[0], tri[1], tri[2]};
      w = {std::max(l0, 0.0), std::max(l1, 0.0), std::max(l2, 0.0)};
      const double s = w[0] + w[1] + w[2];
      for (double& wi : w) wi /= s;
      return;
    }
  }
}

CellMeshes mesh_cell(const CellGeometry& geom, double h) {
  if (h <= 0.0) throw MeshError("mesh size h must be > 0");
  const int n = std::max(4, static_cast<int>(std::ceil(1.0 / h - 1e-12)));

  CellMeshes out;

  if (!geom.has_inclusion()) {
    RectMesh rm = build_rect_mesh(1.0, 1.0, n, n);
    out.solid = std::move(rm.mesh);
    out.periodic = build_periodic_map(out.solid);
    return out;
  }

  const InclusionShape& shape = geom.inclusion;
  const Vec2 center = shape.kind == InclusionKind::disk ? shape.center
                                                        : polygon_centroid(shape.vertices);

  // One ray per uniform boundary point of the cell, counter-clockwise from
  // the origin corner. The i/n fractions are computed once so that opposite
  // faces carry bitwise-identical offsets (periodic pairing is exact).
  std::vector<double> frac(n + 1);
  for (int i = 0; i <= n; ++i) frac[i] = static_cast<double>(i) / n;

  const int nray = 4 * n;
  std::vector<Vec2> bpoint(nray);
  for (int i = 0; i < n; ++i) {
    bpoint[i] = {frac[i], 0.0};
    bpoint[n + i] = {1.0, frac[i]};
    bpoint[2 * n + i] = {frac[n - i], 1.0};
    bpoint[3 * n + i] = {0.0, frac[n - i]};
  }

  std::vector<Vec2> dir(nray);
  std::vector<double> rho(nray), reach(nray);
  double rho_min = std::numeric_limits<double>::infinity();
  double rho_max = 0.0;
  double gap_max = 0.0;
  for (int j = 0; j < nray; ++j) {
    const Vec2 d = bpoint[j] - center;
    const double len = norm(d);
    dir[j] = (1.0 / len) * d;
    rho[j] = inclusion_radius_along(shape, center, dir[j]);
    reach[j] = len;
    if (rho[j] >= len) {
      throw MeshError("inclusion reaches the cell boundary along a mesh ray");
    }
    rho_min = std::min(rho_min, rho[j]);
    rho_max = std::max(rho_max, rho[j]);
    gap_max = std::max(gap_max, len - rho[j]);
  }
  if (h >= rho_min) {
    std::ostringstream os;
    os << "mesh size h = " << h << " must be below the inclusion radius " << rho_min;
    throw MeshError(os.str());
  }

  std::vector<Vec2> gamma(nray);
  for (int j = 0; j < nray; ++j) gamma[j] = center + rho[j] * dir[j];

  // ---- solid mesh: radial web between the interface ring and the square ----
  TriMesh& Z = out.solid;
  const int kout = std::max(1, static_cast<int>(std::ceil(gap_max / (1.8 * h))));
  auto zidx = [&](int t, int j) { return t * nray + j; };
  Z.vertices.resize(static_cast<std::size_t>(kout + 1) * nray);
  for (int j = 0; j < nray; ++j) {
    Z.vertices[zidx(0, j)] = gamma[j];
    Z.vertices[zidx(kout, j)] = bpoint[j];
    for (int t = 1; t < kout; ++t) {
      const double s = static_cast<double>(t) / kout;
      Z.vertices[zidx(t, j)] = gamma[j] + s * (bpoint[j] - gamma[j]);
    }
  }
  for (int t = 0; t < kout; ++t) {
    for (int j = 0; j < nray; ++j) {
      const int jn = (j + 1) % nray;
      push_quad(Z, zidx(t, j), zidx(t, jn), zidx(t + 1, jn), zidx(t + 1, j), Region::solid);
    }
  }
  for (int j = 0; j < nray; ++j) {
    Z.boundary_edges.push_back({zidx(0, j), zidx(0, (j + 1) % nray), BoundaryTag::interface});
    Z.boundary_edges.push_back({zidx(kout, j), zidx(kout, (j + 1) % nray), BoundaryTag::outer});
  }

  // ---- inclusion mesh: shrinking rings stitched toward the center ----
  TriMesh& X = out.inclusion;
  const int kin = std::max(1, static_cast<int>(std::round(rho_max / h)));
  std::vector<int> ring_count(kin + 1);
  ring_count[kin] = nray;
  for (int t = kin - 1; t >= 1; --t) {
    int m = 4 * std::max(2, static_cast<int>(std::round(static_cast<double>(n) * t / kin)));
    ring_count[t] = std::min(m, ring_count[t + 1]);
  }

  std::vector<std::vector<int>> ring_idx(kin + 1);
  std::vector<std::vector<double>> ring_param(kin + 1);
  for (int t = 1; t <= kin; ++t) {
    const int m = ring_count[t];
    ring_idx[t].resize(m);
    ring_param[t].resize(m);
    for (int s = 0; s < m; ++s) {
      const int q = static_cast<int>(std::round(static_cast<double>(s) * nray / m)) % nray;
      ring_param[t][s] = static_cast<double>(q) / nray;
      Vec2 p;
      if (t == kin) {
        p = gamma[q];  // interface vertices shared bitwise with the solid mesh
      } else {
        const double scale = static_cast<double>(t) / kin;
        p = center + (scale * rho[q]) * dir[q];
      }
      ring_idx[t][s] = X.num_vertices();
      X.vertices.push_back(p);
    }
  }
  const int center_idx = X.num_vertices();
  X.vertices.push_back(center);
  {
    const auto& r1 = ring_idx[1];
    const int m = static_cast<int>(r1.size());
    for (int s = 0; s < m; ++s) {
      X.triangles.push_back({center_idx, r1[s], r1[(s + 1) % m]});
      X.region.push_back(Region::inclusion);
    }
  }
  for (int t = 1; t < kin; ++t) {
    stitch_rings(X, ring_idx[t], ring_param[t], ring_idx[t + 1], ring_param[t + 1],
                 Region::inclusion);
  }
  {
    const auto& rg = ring_idx[kin];
    for (int s = 0; s < nray; ++s) {
      X.boundary_edges.push_back({rg[s], rg[(s + 1) % nray], BoundaryTag::interface});
    }
  }

  validate_mesh(Z, "cell solid mesh");
  validate_mesh(X, "cell inclusion mesh");
  out.periodic = build_periodic_map(Z);
  return out;
}

PerforatedMeshes mesh_perforated(const PerforatedDomain& dom, double h) {
  const double h_cell = h / dom.epsilon;
  if (dom.cell.has_inclusion() && h_cell >= dom.cell.inclusion.radius &&
      dom.cell.inclusion.kind == InclusionKind::disk) {
    std::ostringstream os;
    os << "perforated mesh size h = " << h << " must resolve the scaled inclusion "
       << "(need h < " << dom.cell.inclusion.radius * dom.epsilon << ")";
    throw MeshError(os.str());
  }
  const CellMeshes cm = mesh_cell(dom.cell, h_cell);

  PerforatedMeshes out;
  out.cell_h = h_cell;
  const double eps = dom.epsilon;

  auto tile_mesh = [&](const TriMesh& src, TriMesh& dst, std::vector<TileRef>& prov,
                       bool dedup) {
    CoordMap lookup;
    for (int ky = 0; ky < dom.tiles_y; ++ky) {
      for (int kx = 0; kx < dom.tiles_x; ++kx) {
        const int tile = ky * dom.tiles_x + kx;
        std::vector<int> remap(src.vertices.size());
        for (int v = 0; v < src.num_vertices(); ++v) {
          // (k + p) is exact for the boundary offsets i/n, so seams dedup
          // bitwise across tiles.
          const Vec2 p{(kx + src.vertices[v].x) * eps, (ky + src.vertices[v].y) * eps};
          if (dedup) {
            const auto [it, inserted] = lookup.emplace(key_of(p), dst.num_vertices());
            if (inserted) {
              dst.vertices.push_back(p);
              prov.push_back({tile, v});
            }
            remap[v] = it->second;
          } else {
            remap[v] = dst.num_vertices();
            dst.vertices.push_back(p);
            prov.push_back({tile, v});
          }
        }
        for (std::size_t t = 0; t < src.triangles.size(); ++t) {
          const auto& tri = src.triangles[t];
          dst.triangles.push_back({remap[tri[0]], remap[tri[1]], remap[tri[2]]});
          dst.region.push_back(src.region[t]);
        }
      }
    }
  };

  tile_mesh(cm.solid, out.bulk, out.bulk_provenance, true);
  if (dom.cell.has_inclusion()) {
    tile_mesh(cm.inclusion, out.inclusions, out.inclusion_provenance, false);
  }

  // Retag boundaries of the merged bulk mesh: free edges on the outer
  // rectangle are Gamma_L, all other free edges are interface rings.
  const double wx = static_cast<double>(dom.tiles_x) * eps;
  const double wy = static_cast<double>(dom.tiles_y) * eps;
  for (const auto& [a, b] : free_edges(out.bulk)) {
    const Vec2 pa = out.bulk.vertices[a];
    const Vec2 pb = out.bulk.vertices[b];
    const bool outer = (pa.x == 0.0 && pb.x == 0.0) || (pa.x == wx && pb.x == wx) ||
                       (pa.y == 0.0 && pb.y == 0.0) || (pa.y == wy && pb.y == wy);
    out.bulk.boundary_edges.push_back({a, b, outer ? BoundaryTag::outer : BoundaryTag::interface});
  }
  for (const auto& [a, b] : free_edges(out.inclusions)) {
    out.inclusions.boundary_edges.push_back({a, b, BoundaryTag::interface});
  }

  validate_mesh(out.bulk, "perforated bulk mesh");
  if (!out.inclusions.empty()) validate_mesh(out.inclusions, "perforated inclusion mesh");
  return out;
}

InterfacePairing pair_interfaces(const TriMesh& inclusion_side, const TriMesh& solid_side) {
  auto vertex_weights = [](const TriMesh& mesh) {
    std::unordered_map<int, double> w;
    for (const auto& be : mesh.boundary_edges) {
      if (be.tag != BoundaryTag::interface) continue;
      const double half = 0.5 * norm(mesh.vertices[be.a] - mesh.vertices[be.b]);
      w[be.a] += half;
      w[be.b] += half;
    }
    return w;
  };
  const auto wu = vertex_weights(inclusion_side);
  const auto wv = vertex_weights(solid_side);
  if (wu.size() != wv.size()) {
    throw MeshError("interface vertex sets differ between inclusion and solid meshes");
  }

  CoordMap solid_lookup;
  for (const auto& [v, weight] : wv) {
    (void)weight;
    solid_lookup.emplace(key_of(solid_side.vertices[v]), v);
  }

  InterfacePairing pairing;
  pairing.inclusion_node.reserve(wu.size());
  std::vector<int> unodes;
  unodes.reserve(wu.size());
  for (const auto& [v, weight] : wu) {
    (void)weight;
    unodes.push_back(v);
  }
  std::sort(unodes.begin(), unodes.end());
  for (int v : unodes) {
    const auto it = solid_lookup.find(key_of(inclusion_side.vertices[v]));
    if (it == solid_lookup.end()) {
      throw MeshError("interface vertex of the inclusion mesh missing from the solid mesh");
    }
    pairing.inclusion_node.push_back(v);
    pairing.solid_node.push_back(it->second);
    pairing.weight.push_back(wu.at(v));
  }
  return pairing;
}

InterfaceQuadrature interface_quadrature(const TriMesh& mesh) {
  std::unordered_map<int, double> w;
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != BoundaryTag::interface) continue;
    const double half = 0.5 * norm(mesh.vertices[be.a] - mesh.vertices[be.b]);
    w[be.a] += half;
    w[be.b] += half;
  }
  InterfaceQuadrature q;
  q.node.reserve(w.size());
  for (const auto& [v, weight] : w) {
    (void)weight;
    q.node.push_back(v);
  }
  std::sort(q.node.begin(), q.node.end());
  q.weight.reserve(w.size());
  for (int v : q.node) q.weight.push_back(w.at(v));
  return q;
}

void validate_mesh(const TriMesh& mesh, const char* label) {
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.triangle_area(t) <= 0.0) {
      std::ostringstream os;
      os << label << ": triangle " << t << " has non-positive area " << mesh.triangle_area(t);
      throw MeshError(os.str());
    }
  }
  if (mesh.region.size() != mesh.triangles.size()) {
    throw MeshError(std::string(label) + ": region tags out of sync with triangles");
  }
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& tri : mesh.triangles) {
    for (int v : tri) used[static_cast<std::size_t>(v)] = 1;
  }
  for (std::size_t v = 0; v < used.size(); ++v) {
    if (!used[v]) {
      std::ostringstream os;
      os << label << ": vertex " << v << " is not referenced by any triangle";
      throw MeshError(os.str());
    }
  }
  // Interface polylines must close: every interface vertex has exactly two
  // adjacent interface edges.
  std::unordered_map<int, int> degree;
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != BoundaryTag::interface) continue;
    ++degree[be.a];
    ++degree[be.b];
  }
  for (const auto& [v, d] : degree) {
    if (d != 2) {
      std::ostringstream os;
      os << label << ": interface polyline is not closed at vertex " << v;
      throw MeshError(os.str());
    }
  }
}

}  // namespace smolhom
