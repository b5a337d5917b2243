#include "smolhom/cell_problem.hpp"

#include <cmath>
#include <sstream>

#include "smolhom/errors.hpp"
#include "smolhom/parallel.hpp"

namespace smolhom {

namespace {

struct TriGrad {
  double area;
  std::array<Vec2, 3> grad;
};

TriGrad p1_gradients(const TriMesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Vec2 p0 = mesh.vertices[tri[0]];
  const Vec2 p1 = mesh.vertices[tri[1]];
  const Vec2 p2 = mesh.vertices[tri[2]];
  const double twice = cross(p1 - p0, p2 - p0);
  TriGrad g;
  g.area = 0.5 * twice;
  g.grad[0] = {(p1.y - p2.y) / twice, (p2.x - p1.x) / twice};
  g.grad[1] = {(p2.y - p0.y) / twice, (p0.x - p2.x) / twice};
  g.grad[2] = {(p0.y - p1.y) / twice, (p1.x - p0.x) / twice};
  return g;
}

Vec2 field_gradient(const TriGrad& g, const TriMesh& mesh, int t,
                    const std::vector<double>& values) {
  Vec2 grad{0.0, 0.0};
  const auto& tri = mesh.triangles[t];
  for (int i = 0; i < 3; ++i) {
    grad = grad + values[static_cast<std::size_t>(tri[i])] * g.grad[i];
  }
  return grad;
}

}  // namespace

CorrectorField solve_corrector(const TriMesh& solid, const PeriodicMap& periodic,
                               int direction, double tol) {
  if (direction < 1 || direction > 3) {
    throw SolverError("solve_corrector: direction must be 1, 2 or 3");
  }
  CorrectorField out;
  out.direction = direction;
  out.values.assign(solid.vertices.size(), 0.0);
  // The axial unit vector has no in-plane component: the constant solves the
  // problem and its zero-mean representative is identically zero.
  if (direction == 3) return out;

  const SparseOperator K = assemble_stiffness(solid, 1.0);

  // Load: -integral(e_i . grad phi_j).
  std::vector<double> load(solid.vertices.size(), 0.0);
  for (int t = 0; t < solid.num_triangles(); ++t) {
    const TriGrad g = p1_gradients(solid, t);
    const auto& tri = solid.triangles[t];
    for (int i = 0; i < 3; ++i) {
      const double component = direction == 1 ? g.grad[i].x : g.grad[i].y;
      load[static_cast<std::size_t>(tri[i])] -= g.area * component;
    }
  }

  const PeriodicCondenser cond = make_condenser(solid.num_vertices(), periodic);
  const SparseOperator Kc = condense_periodic(K, cond);
  const std::vector<double> rhs = cond.restrict_sum(load);

  CgOptions opts;
  opts.tol = tol;
  opts.project_nullspace = true;
  auto [wc, report] = solve_cg(Kc, rhs, opts);
  if (report.breakdown) {
    std::ostringstream os;
    os << "cell corrector " << direction << " failed to converge (residual "
       << report.relative_residual << " after " << report.iterations << " iterations)";
    throw SolverError(os.str());
  }
  out.solve = report;
  out.values = cond.prolong(wc);

  // Normalize to zero mass-weighted mean over Z.
  const std::vector<double> lumped = lumped_mass_vector(solid);
  double mass = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < lumped.size(); ++i) {
    mass += lumped[i];
    mean += lumped[i] * out.values[i];
  }
  mean /= mass;
  for (double& v : out.values) v -= mean;
  return out;
}

EffectiveTensor effective_tensor(const std::array<CorrectorField, 2>& correctors,
                                 const TriMesh& solid, double solid_fraction) {
  EffectiveTensor t;
  t.solid_fraction = solid_fraction;
  double a00 = 0.0, a01 = 0.0, a11 = 0.0;
  for (int tri = 0; tri < solid.num_triangles(); ++tri) {
    const TriGrad g = p1_gradients(solid, tri);
    const Vec2 g0 = field_gradient(g, solid, tri, correctors[0].values) + Vec2{1.0, 0.0};
    const Vec2 g1 = field_gradient(g, solid, tri, correctors[1].values) + Vec2{0.0, 1.0};
    a00 += g.area * dot(g0, g0);
    a01 += g.area * dot(g0, g1);
    a11 += g.area * dot(g1, g1);
  }
  t.A[0][0] = a00;
  t.A[0][1] = t.A[1][0] = a01;
  t.A[1][1] = a11;
  // Structural axial block: the third corrector vanishes, so the axial
  // entry is exactly the solid fraction and the cross terms are zero.
  t.A[2][2] = solid_fraction;
  t.A[0][2] = t.A[2][0] = 0.0;
  t.A[1][2] = t.A[2][1] = 0.0;
  return t;
}

std::array<std::array<double, 2>, 2> effective_tensor_flux_form(
    const std::array<CorrectorField, 2>& correctors, const TriMesh& solid) {
  std::array<std::array<double, 2>, 2> A{};
  for (int tri = 0; tri < solid.num_triangles(); ++tri) {
    const TriGrad g = p1_gradients(solid, tri);
    const Vec2 g0 = field_gradient(g, solid, tri, correctors[0].values) + Vec2{1.0, 0.0};
    const Vec2 g1 = field_gradient(g, solid, tri, correctors[1].values) + Vec2{0.0, 1.0};
    A[0][0] += g.area * g0.x;
    A[0][1] += g.area * g0.y;
    A[1][0] += g.area * g1.x;
    A[1][1] += g.area * g1.y;
  }
  return A;
}

CellProblemResult solve_cell_problem(const TriMesh& solid, const PeriodicMap& periodic,
                                     double solid_fraction, double tol) {
  CellProblemResult res;
  global_pool().parallel_for(2, [&](int i) {
    res.correctors[static_cast<std::size_t>(i)] = solve_corrector(solid, periodic, i + 1, tol);
  });
  res.tensor = effective_tensor(res.correctors, solid, solid_fraction);
  return res;
}

std::vector<double> corrector_reconstruct(const std::array<CorrectorField, 2>& correctors,
                                          const std::array<double, 3>& macro_gradient) {
  const std::size_t n = correctors[0].values.size();
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < 2; ++i) {
    const double gi = macro_gradient[static_cast<std::size_t>(i)];
    if (gi == 0.0) continue;
    for (std::size_t k = 0; k < n; ++k) out[k] += gi * correctors[static_cast<std::size_t>(i)].values[k];
  }
  return out;
}

}  // namespace smolhom
