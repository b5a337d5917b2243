#ifndef SMOLHOM_ASSEMBLY_HPP_
#define SMOLHOM_ASSEMBLY_HPP_

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "smolhom/mesh.hpp"

namespace smolhom {

// Symmetric sparse operator in CSR form. All assembly routines here produce
// structurally symmetric patterns with symmetric values.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(int n, std::vector<std::array<int, 2>> idx, std::vector<double> val);

  int dimension() const { return n_; }
  std::size_t nonzeros() const { return vals_.size(); }

  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> apply(const std::vector<double>& x) const;

  double diagonal(int i) const;
  std::vector<double> diagonal_vector() const;
  std::vector<double> row_sums() const;

  // ||A - A^T||_max, for symmetry assertions in tests.
  double symmetry_defect() const;

  // Scaled sum: this + alpha * other (patterns may differ).
  SparseOperator axpy(double alpha, const SparseOperator& other) const;
  SparseOperator scaled(double alpha) const;
  // this + diag(d).
  SparseOperator add_diagonal(std::span<const double> d) const;

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<double>& values() const { return vals_; }

 private:
  int n_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> cols_;
  std::vector<double> vals_;
};

struct LinearSolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool breakdown = false;
};

// coeff * integral(grad phi_i . grad phi_j)
SparseOperator assemble_stiffness(const TriMesh& mesh, double coeff);

// integral((S grad phi_j) . grad phi_i) for a constant 2x2 symmetric tensor S.
SparseOperator assemble_stiffness_tensor(const TriMesh& mesh,
                                         const std::array<std::array<double, 2>, 2>& S);

// integral(phi_i phi_j); consistent by default, lumped on request.
SparseOperator assemble_mass(const TriMesh& mesh, bool lumped = false);

// Diagonal of the lumped mass as a plain vector (nodal dual areas).
std::vector<double> lumped_mass_vector(const TriMesh& mesh);

// integral over tagged boundary edges of weight * phi_i phi_j; the weight is
// evaluated at edge midpoints.
SparseOperator assemble_boundary_mass(const TriMesh& mesh, BoundaryTag tag,
                                      const std::function<double(Vec2)>& weight);

// Fold periodic slave rows/columns into their masters. Produces an operator
// on the reduced index set together with the index map used.
struct PeriodicCondenser {
  std::vector<int> full_to_reduced;  // size = full dimension
  std::vector<int> reduced_to_full;  // representative (master) per reduced index
  int reduced_dimension() const { return static_cast<int>(reduced_to_full.size()); }

  // Sum slave entries into masters (dual/load vectors).
  std::vector<double> restrict_sum(std::span<const double> full) const;
  // Copy master values back onto slaves (primal vectors).
  std::vector<double> prolong(std::span<const double> reduced) const;
};

PeriodicCondenser make_condenser(int full_dimension, const PeriodicMap& map);

SparseOperator condense_periodic(const SparseOperator& op, const PeriodicMap& map);
SparseOperator condense_periodic(const SparseOperator& op, const PeriodicCondenser& cond);

struct CgOptions {
  double tol = 1e-10;          // relative residual
  int max_iterations = 0;      // 0: choose from dimension
  bool project_nullspace = false;  // deflate the constant mode each iterate
  const std::vector<double>* initial_guess = nullptr;
};

// Jacobi-preconditioned conjugate gradients. With project_nullspace the
// right-hand side is compatibilized and iterates are kept mean-free.
std::pair<std::vector<double>, LinearSolveReport> solve_cg(const SparseOperator& A,
                                                           std::span<const double> rhs,
                                                           const CgOptions& opts = {});

}  // namespace smolhom

#endif  // SMOLHOM_ASSEMBLY_HPP_
