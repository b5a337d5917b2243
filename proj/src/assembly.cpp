#include "smolhom/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "smolhom/errors.hpp"

namespace smolhom {

SparseOperator::SparseOperator(int n, std::vector<std::array<int, 2>> idx,
                               std::vector<double> val) {
  n_ = n;
  // Sort triplets by (row, col) and combine duplicates.
  std::vector<std::size_t> order(idx.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return idx[a] < idx[b];
  });
  row_ptr_.assign(static_cast<std::size_t>(n) + 1, 0);
  cols_.reserve(idx.size());
  vals_.reserve(idx.size());
  int prev_r = -1, prev_c = -1;
  for (std::size_t k : order) {
    const int r = idx[k][0];
    const int c = idx[k][1];
    if (r == prev_r && c == prev_c) {
      vals_.back() += val[k];
    } else {
      cols_.push_back(c);
      vals_.push_back(val[k]);
      ++row_ptr_[static_cast<std::size_t>(r) + 1];
      prev_r = r;
      prev_c = c;
    }
  }
  for (int r = 0; r < n; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

void SparseOperator::apply(std::span<const double> x, std::span<double> y) const {
  for (int r = 0; r < n_; ++r) {
    double acc = 0.0;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      acc += vals_[k] * x[static_cast<std::size_t>(cols_[k])];
    }
    y[static_cast<std::size_t>(r)] = acc;
  }
}

std::vector<double> SparseOperator::apply(const std::vector<double>& x) const {
  std::vector<double> y(static_cast<std::size_t>(n_));
  apply(x, y);
  return y;
}

double SparseOperator::diagonal(int i) const {
  for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
    if (cols_[k] == i) return vals_[k];
  }
  return 0.0;
}

std::vector<double> SparseOperator::diagonal_vector() const {
  std::vector<double> d(static_cast<std::size_t>(n_), 0.0);
  for (int r = 0; r < n_; ++r) d[r] = diagonal(r);
  return d;
}

std::vector<double> SparseOperator::row_sums() const {
  std::vector<double> s(static_cast<std::size_t>(n_), 0.0);
  for (int r = 0; r < n_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s[r] += vals_[k];
  }
  return s;
}

double SparseOperator::symmetry_defect() const {
  double defect = 0.0;
  for (int r = 0; r < n_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const int c = cols_[k];
      double transposed = 0.0;
      for (int k2 = row_ptr_[c]; k2 < row_ptr_[c + 1]; ++k2) {
        if (cols_[k2] == r) {
          transposed = vals_[k2];
          break;
        }
      }
      defect = std::max(defect, std::abs(vals_[k] - transposed));
    }
  }
  return defect;
}

SparseOperator SparseOperator::axpy(double alpha, const SparseOperator& other) const {
  if (other.n_ != n_) throw SolverError("operator sum: dimension mismatch");
  std::vector<std::array<int, 2>> idx;
  std::vector<double> val;
  idx.reserve(vals_.size() + other.vals_.size());
  val.reserve(vals_.size() + other.vals_.size());
  for (int r = 0; r < n_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      idx.push_back({r, cols_[k]});
      val.push_back(vals_[k]);
    }
    for (int k = other.row_ptr_[r]; k < other.row_ptr_[r + 1]; ++k) {
      idx.push_back({r, other.cols_[k]});
      val.push_back(alpha * other.vals_[k]);
    }
  }
  return SparseOperator(n_, std::move(idx), std::move(val));
}

SparseOperator SparseOperator::scaled(double alpha) const {
  SparseOperator out = *this;
  for (double& v : out.vals_) v *= alpha;
  return out;
}

SparseOperator SparseOperator::add_diagonal(std::span<const double> d) const {
  if (static_cast<int>(d.size()) != n_) throw SolverError("add_diagonal: dimension mismatch");
  std::vector<std::array<int, 2>> idx;
  std::vector<double> val;
  idx.reserve(vals_.size() + d.size());
  val.reserve(vals_.size() + d.size());
  for (int r = 0; r < n_; ++r) {
    idx.push_back({r, r});
    val.push_back(d[static_cast<std::size_t>(r)]);
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      idx.push_back({r, cols_[k]});
      val.push_back(vals_[k]);
    }
  }
  return SparseOperator(n_, std::move(idx), std::move(val));
}

namespace {

struct TriGeom {
  double area;
  std::array<Vec2, 3> grad;  // P1 shape-function gradients
};

TriGeom triangle_geometry(const TriMesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Vec2 p0 = mesh.vertices[tri[0]];
  const Vec2 p1 = mesh.vertices[tri[1]];
  const Vec2 p2 = mesh.vertices[tri[2]];
  const double twice = cross(p1 - p0, p2 - p0);
  if (!(twice > 0.0)) {
    std::ostringstream os;
    os << "degenerate triangle " << t << " (doubled area " << twice << ")";
    throw SolverError(os.str());
  }
  TriGeom g;
  g.area = 0.5 * twice;
  g.grad[0] = {(p1.y - p2.y) / twice, (p2.x - p1.x) / twice};
  g.grad[1] = {(p2.y - p0.y) / twice, (p0.x - p2.x) / twice};
  g.grad[2] = {(p0.y - p1.y) / twice, (p1.x - p0.x) / twice};
  return g;
}

}  // namespace

SparseOperator assemble_stiffness(const TriMesh& mesh, double coeff) {
  std::vector<std::array<int, 2>> idx;
  std::vector<double> val;
  idx.reserve(9 * mesh.triangles.size());
  val.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const TriGeom g = triangle_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        idx.push_back({tri[i], tri[j]});
        val.push_back(coeff * g.area * dot(g.grad[i], g.grad[j]));
      }
    }
  }
  return SparseOperator(mesh.num_vertices(), std::move(idx), std::move(val));
}

SparseOperator assemble_stiffness_tensor(const TriMesh& mesh,
                                         const std::array<std::array<double, 2>, 2>& S) {
  std::vector<std::array<int, 2>> idx;
  std::vector<double> val;
  idx.reserve(9 * mesh.triangles.size());
  val.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const TriGeom g = triangle_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    for (int j = 0; j < 3; ++j) {
      const Vec2 Sg{S[0][0] * g.grad[j].x + S[0][1] * g.grad[j].y,
                    S[1][0] * g.grad[j].x + S[1][1] * g.grad[j].y};
      for (int i = 0; i < 3; ++i) {
        idx.push_back({tri[i], tri[j]});
        val.push_back(g.area * dot(Sg, g.grad[i]));
      }
    }
  }
  return SparseOperator(mesh.num_vertices(), std::move(idx), std::move(val));
}

SparseOperator assemble_mass(const TriMesh& mesh, bool lumped) {
  std::vector<std::array<int, 2>> idx;
  std::vector<double> val;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const TriGeom g = triangle_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    if (lumped) {
      for (int i = 0; i < 3; ++i) {
        idx.push_back({tri[i], tri[i]});
        val.push_back(g.area / 3.0);
      }
    } else {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          idx.push_back({tri[i], tri[j]});
          val.push_back(g.area / 12.0 * (i == j ? 2.0 : 1.0));
        }
      }
    }
  }
  return SparseOperator(mesh.num_vertices(), std::move(idx), std::move(val));
}

std::vector<double> lumped_mass_vector(const TriMesh& mesh) {
  std::vector<double> m(mesh.vertices.size(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double third = mesh.triangle_area(t) / 3.0;
    for (int v : mesh.triangles[t]) m[static_cast<std::size_t>(v)] += third;
  }
  return m;
}

SparseOperator assemble_boundary_mass(const TriMesh& mesh, BoundaryTag tag,
                                      const std::function<double(Vec2)>& weight) {
  std::vector<std::array<int, 2>> idx;
  std::vector<double> val;
  bool any = false;
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != tag) continue;
    any = true;
    const Vec2 pa = mesh.vertices[be.a];
    const Vec2 pb = mesh.vertices[be.b];
    const double len = norm(pb - pa);
    const double w = weight(0.5 * (pa + pb));
    const double c = w * len / 6.0;
    idx.push_back({be.a, be.a});
    val.push_back(2.0 * c);
    idx.push_back({be.b, be.b});
    val.push_back(2.0 * c);
    idx.push_back({be.a, be.b});
    val.push_back(c);
    idx.push_back({be.b, be.a});
    val.push_back(c);
  }
  if (!any) throw SolverError("assemble_boundary_mass: no boundary edges carry the requested tag");
  return SparseOperator(mesh.num_vertices(), std::move(idx), std::move(val));
}

PeriodicCondenser make_condenser(int full_dimension, const PeriodicMap& map) {
  PeriodicCondenser cond;
  cond.full_to_reduced.assign(static_cast<std::size_t>(full_dimension), -1);
  std::vector<int> master(static_cast<std::size_t>(full_dimension));
  std::iota(master.begin(), master.end(), 0);
  for (const auto& [slave, m] : map.pairs) {
    if (slave < 0 || slave >= full_dimension || m < 0 || m >= full_dimension) {
      throw SolverError("periodic map refers to vertices outside the operator");
    }
    if (master[static_cast<std::size_t>(m)] != m) {
      throw SolverError("periodic map: master is itself a slave");
    }
    master[static_cast<std::size_t>(slave)] = m;
  }
  for (int v = 0; v < full_dimension; ++v) {
    if (master[static_cast<std::size_t>(v)] == v) {
      cond.full_to_reduced[static_cast<std::size_t>(v)] =
          static_cast<int>(cond.reduced_to_full.size());
      cond.reduced_to_full.push_back(v);
    }
  }
  for (int v = 0; v < full_dimension; ++v) {
    const int m = master[static_cast<std::size_t>(v)];
    if (m != v) cond.full_to_reduced[static_cast<std::size_t>(v)] = cond.full_to_reduced[static_cast<std::size_t>(m)];
  }
  return cond;
}

std::vector<double> PeriodicCondenser::restrict_sum(std::span<const double> full) const {
  std::vector<double> out(reduced_to_full.size(), 0.0);
  for (std::size_t v = 0; v < full.size(); ++v) {
    out[static_cast<std::size_t>(full_to_reduced[v])] += full[v];
  }
  return out;
}

std::vector<double> PeriodicCondenser::prolong(std::span<const double> reduced) const {
  std::vector<double> out(full_to_reduced.size());
  for (std::size_t v = 0; v < out.size(); ++v) {
    out[v] = reduced[static_cast<std::size_t>(full_to_reduced[v])];
  }
  return out;
}

SparseOperator condense_periodic(const SparseOperator& op, const PeriodicCondenser& cond) {
  if (static_cast<int>(cond.full_to_reduced.size()) != op.dimension()) {
    throw SolverError("condense_periodic: map does not match operator dimension");
  }
  std::vector<std::array<int, 2>> idx;
  std::vector<double> val;
  idx.reserve(op.nonzeros());
  val.reserve(op.nonzeros());
  const auto& rp = op.row_ptr();
  const auto& cols = op.cols();
  const auto& vals = op.values();
  for (int r = 0; r < op.dimension(); ++r) {
    const int rr = cond.full_to_reduced[static_cast<std::size_t>(r)];
    for (int k = rp[r]; k < rp[r + 1]; ++k) {
      idx.push_back({rr, cond.full_to_reduced[static_cast<std::size_t>(cols[k])]});
      val.push_back(vals[k]);
    }
  }
  return SparseOperator(cond.reduced_dimension(), std::move(idx), std::move(val));
}

SparseOperator condense_periodic(const SparseOperator& op, const PeriodicMap& map) {
  return condense_periodic(op, make_condenser(op.dimension(), map));
}

namespace {

double dot_vec(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void remove_mean(std::span<double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

}  // namespace

std::pair<std::vector<double>, LinearSolveReport> solve_cg(const SparseOperator& A,
                                                           std::span<const double> rhs,
                                                           const CgOptions& opts) {
  const int n = A.dimension();
  LinearSolveReport report;
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  if (opts.initial_guess) {
    if (static_cast<int>(opts.initial_guess->size()) != n) {
      throw SolverError("solve_cg: initial guess dimension mismatch");
    }
    x = *opts.initial_guess;
  }

  std::vector<double> b(rhs.begin(), rhs.end());
  if (opts.project_nullspace) {
    remove_mean(b);
    remove_mean(x);
  }
  const double bnorm = std::sqrt(dot_vec(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {std::move(x), report};
  }

  std::vector<double> inv_diag(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double d = A.diagonal(i);
    if (d <= 0.0) throw SolverError("solve_cg: non-positive diagonal entry; Jacobi preconditioner invalid");
    inv_diag[static_cast<std::size_t>(i)] = 1.0 / d;
  }

  std::vector<double> r(static_cast<std::size_t>(n));
  A.apply(x, r);
  for (int i = 0; i < n; ++i) r[i] = b[static_cast<std::size_t>(i)] - r[i];
  if (opts.project_nullspace) remove_mean(r);

  std::vector<double> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  std::vector<double> p = z;
  std::vector<double> Ap(static_cast<std::size_t>(n));
  double rz = dot_vec(r, z);

  const int max_it = opts.max_iterations > 0 ? opts.max_iterations : std::max(200, 20 * n);
  double rnorm = std::sqrt(dot_vec(r, r));
  for (int it = 0; it < max_it && rnorm > opts.tol * bnorm; ++it) {
    A.apply(p, Ap);
    const double pAp = dot_vec(p, Ap);
    if (!(pAp > 0.0)) {
      report.breakdown = true;
      break;
    }
    const double alpha = rz / pAp;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    if (opts.project_nullspace) {
      remove_mean(x);
      remove_mean(r);
    }
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = dot_vec(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = std::sqrt(dot_vec(r, r));
    report.iterations = it + 1;
  }
  report.relative_residual = rnorm / bnorm;
  if (rnorm > opts.tol * bnorm) report.breakdown = true;
  return {std::move(x), report};
}

}  // namespace smolhom
